use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::tx::ChannelTerms;
use crate::channel::{ChannelId, OffChainTxPair};
use crate::codec::{Encode, Writer};
use crate::credentials::DidStatus;
use crate::identity::{Address, Did, DidDocument, Multiaddr};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub did: Did,
    pub multiaddr: Multiaddr,
    pub document: DidDocument,
    pub created_at: u64,
    pub status: DidStatus,
}

impl Encode for RegistryEntry {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.did)
            .put(&self.multiaddr)
            .put(&self.document)
            .u64(self.created_at)
            .u8(match self.status {
                DidStatus::Active => 0,
                DidStatus::Revoked => 1,
            });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountState {
    pub credit_score: i64,
    /// Last value settled on chain; not live telemetry.
    pub energy_level: u64,
}

impl Encode for AccountState {
    fn encode(&self, w: &mut Writer) {
        w.i64(self.credit_score).u64(self.energy_level);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum ChannelPhase {
    Pending,
    Open,
    Challenged {
        deadline: u64,
        candidate: Option<OffChainTxPair>,
        submitted_by: Address,
    },
    Closed,
}

impl ChannelPhase {
    /// Position in the Pending → Open → Challenged → Closed order.
    pub fn rank(&self) -> u8 {
        match self {
            ChannelPhase::Pending => 0,
            ChannelPhase::Open => 1,
            ChannelPhase::Challenged { .. } => 2,
            ChannelPhase::Closed => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelPhase::Pending => "Pending",
            ChannelPhase::Open => "Open",
            ChannelPhase::Challenged { .. } => "Challenged",
            ChannelPhase::Closed => "Closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnChainChannelRecord {
    pub terms: ChannelTerms,
    /// (seller confirmed, buyer confirmed)
    pub confirmations: (bool, bool),
    pub phase: ChannelPhase,
    /// Parties whose unilateral claim was superseded by a newer signed pair.
    pub cheaters: BTreeSet<Address>,
    pub opened_at: Option<u64>,
    pub closed_at: Option<u64>,
    pub settlement: Option<Settlement>,
}

impl OnChainChannelRecord {
    pub fn participants(&self) -> (Address, Address) {
        (self.terms.seller, self.terms.buyer)
    }

    pub fn is_participant(&self, a: &Address) -> bool {
        *a == self.terms.seller || *a == self.terms.buyer
    }

    pub fn counterparty(&self, a: &Address) -> Address {
        if *a == self.terms.seller {
            self.terms.buyer
        } else {
            self.terms.seller
        }
    }
}

impl Encode for OnChainChannelRecord {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.terms)
            .bool(self.confirmations.0)
            .bool(self.confirmations.1);
        match &self.phase {
            ChannelPhase::Pending => {
                w.u8(0);
            }
            ChannelPhase::Open => {
                w.u8(1);
            }
            ChannelPhase::Challenged {
                deadline,
                candidate,
                submitted_by,
            } => {
                w.u8(2).u64(*deadline).option(candidate.as_ref()).put(submitted_by);
            }
            ChannelPhase::Closed => {
                w.u8(3);
            }
        }
        let cheaters: Vec<Address> = self.cheaters.iter().copied().collect();
        w.seq(&cheaters);
        for v in [self.opened_at, self.closed_at] {
            match v {
                None => w.u8(0),
                Some(h) => w.u8(1).u64(h),
            };
        }
        w.option(self.settlement.as_ref());
    }
}

/// Final balances movement of a closed channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Settlement {
    pub channel_id: ChannelId,
    pub iteration: u64,
    pub energy_units: u64,
    pub credits: u64,
    pub cooperative: bool,
    /// Net credit change per participant including bonus and penalty.
    pub seller_credit_delta: i64,
    pub buyer_credit_delta: i64,
    pub cheaters: Vec<Address>,
}

impl Encode for Settlement {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.channel_id)
            .u64(self.iteration)
            .u64(self.energy_units)
            .u64(self.credits)
            .bool(self.cooperative)
            .i64(self.seller_credit_delta)
            .i64(self.buyer_credit_delta)
            .seq(&self.cheaters);
    }
}
