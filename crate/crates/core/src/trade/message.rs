use crate::channel::{CloseProposal, SignedOffChainTx};
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::credentials::{Challenge, Presentation};
use crate::identity::{Did, Signature};
use crate::ledger::ChannelTerms;

use super::bus::Envelope;

pub mod kind {
    pub const BEACON: u8 = 1;
    pub const OFFER: u8 = 2;
    pub const PROOF: u8 = 3;
    pub const OFFCHAIN_TX: u8 = 4;
    pub const CLOSE_REQUEST: u8 = 5;
    pub const CLOSE_APPROVAL: u8 = 6;
}

/// Protocol messages carried in bus envelopes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// Buyer broadcast. The presentation is bound to the buyer's own nonce,
    /// which sellers must answer in their offer.
    Beacon {
        requested_units: u64,
        nonce: Challenge,
        presentation: Presentation,
    },
    /// Seller reply: its presentation answers the beacon nonce and `nonce`
    /// is the seller's challenge for the buyer.
    Offer {
        offered_units: u64,
        nonce: Challenge,
        presentation: Presentation,
    },
    /// Buyer's fresh presentation for the chosen seller plus proposed terms.
    Proof {
        terms: ChannelTerms,
        presentation: Presentation,
    },
    OffChainTx(SignedOffChainTx),
    CloseRequest(CloseProposal),
    CloseApproval(Signature),
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::Beacon { .. } => kind::BEACON,
            Message::Offer { .. } => kind::OFFER,
            Message::Proof { .. } => kind::PROOF,
            Message::OffChainTx(_) => kind::OFFCHAIN_TX,
            Message::CloseRequest(_) => kind::CLOSE_REQUEST,
            Message::CloseApproval(_) => kind::CLOSE_APPROVAL,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Message::Beacon {
                requested_units,
                nonce,
                presentation,
            } => {
                w.u64(*requested_units).put(nonce).put(presentation);
            }
            Message::Offer {
                offered_units,
                nonce,
                presentation,
            } => {
                w.u64(*offered_units).put(nonce).put(presentation);
            }
            Message::Proof {
                terms,
                presentation,
            } => {
                w.put(terms).put(presentation);
            }
            Message::OffChainTx(stx) => {
                w.put(stx);
            }
            Message::CloseRequest(p) => {
                w.put(&p.channel_id)
                    .put(&p.exchange_id)
                    .u64(p.iteration)
                    .option(p.pair.as_ref());
            }
            Message::CloseApproval(sig) => {
                w.put(sig);
            }
        }
        w.into_bytes()
    }

    pub fn decode(kind_byte: u8, payload: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(payload);
        let m = match kind_byte {
            kind::BEACON => Message::Beacon {
                requested_units: r.u64()?,
                nonce: r.get()?,
                presentation: r.get()?,
            },
            kind::OFFER => Message::Offer {
                offered_units: r.u64()?,
                nonce: r.get()?,
                presentation: r.get()?,
            },
            kind::PROOF => Message::Proof {
                terms: r.get()?,
                presentation: r.get()?,
            },
            kind::OFFCHAIN_TX => Message::OffChainTx(SignedOffChainTx::decode(&mut r)?),
            kind::CLOSE_REQUEST => Message::CloseRequest(CloseProposal {
                channel_id: r.get()?,
                exchange_id: r.get()?,
                iteration: r.u64()?,
                pair: r.option()?,
            }),
            kind::CLOSE_APPROVAL => Message::CloseApproval(r.get()?),
            other => return Err(DecodeError::invalid("message_kind", format!("unknown kind {other}"))),
        };
        r.finish()?;
        Ok(m)
    }

    pub fn envelope(&self, from: Did, to: Option<Did>) -> Envelope {
        Envelope {
            from,
            to,
            kind: self.kind(),
            payload: self.payload(),
        }
    }

    pub fn open(env: &Envelope) -> Result<Self, DecodeError> {
        Message::decode(env.kind, &env.payload)
    }
}

impl Encode for Message {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.kind()).bytes(&self.payload());
    }
}

impl Decode for Message {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let k = r.u8()?;
        let payload = r.bytes()?;
        Message::decode(k, payload)
    }
}
