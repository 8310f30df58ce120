use serde::{Deserialize, Serialize};

use crate::channel::{ChannelId, ExchangeId, OffChainTxPair};
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::identity::{derive_address, verify, Address, Did, DidDocument, KeyPair, Multiaddr, PublicKey, Signature};

const ONCHAIN_TX_TAG: &[u8] = b"robocomm/onchain-tx/v1";
const CLOSE_APPROVAL_TAG: &[u8] = b"robocomm/close-approval/v1";

/// Terms both parties confirm when opening a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelTerms {
    pub channel_id: ChannelId,
    pub exchange_id: ExchangeId,
    pub seller: Address,
    pub buyer: Address,
    pub unit_price: u64,
}

impl Encode for ChannelTerms {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.channel_id)
            .put(&self.exchange_id)
            .put(&self.seller)
            .put(&self.buyer)
            .u64(self.unit_price);
    }
}

impl Decode for ChannelTerms {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(ChannelTerms {
            channel_id: r.get()?,
            exchange_id: r.get()?,
            seller: r.get()?,
            buyer: r.get()?,
            unit_price: r.u64()?,
        })
    }
}

/// Contract calls. `pair == None` is the empty-trade marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OnChainTx {
    RegisterDid {
        did: Did,
        document: DidDocument,
        multiaddr: Multiaddr,
        reported_energy: u64,
    },
    RevokeDid {
        did: Did,
    },
    AddIssuer {
        issuer_did: Did,
    },
    ConfirmChannel {
        terms: ChannelTerms,
    },
    CooperativeClose {
        channel_id: ChannelId,
        pair: Option<OffChainTxPair>,
        /// The counterparty's approval of exactly this close.
        counter_signature: Signature,
    },
    UnilateralClose {
        channel_id: ChannelId,
        pair: Option<OffChainTxPair>,
    },
    Challenge {
        channel_id: ChannelId,
        pair: OffChainTxPair,
    },
    FinalizeClose {
        channel_id: ChannelId,
    },
}

pub mod kind {
    pub const REGISTER_DID: u8 = 1;
    pub const REVOKE_DID: u8 = 2;
    pub const ADD_ISSUER: u8 = 3;
    pub const CONFIRM_CHANNEL: u8 = 4;
    pub const COOPERATIVE_CLOSE: u8 = 5;
    pub const UNILATERAL_CLOSE: u8 = 6;
    pub const CHALLENGE: u8 = 7;
    pub const FINALIZE_CLOSE: u8 = 8;
}

impl OnChainTx {
    pub fn kind(&self) -> u8 {
        match self {
            OnChainTx::RegisterDid { .. } => kind::REGISTER_DID,
            OnChainTx::RevokeDid { .. } => kind::REVOKE_DID,
            OnChainTx::AddIssuer { .. } => kind::ADD_ISSUER,
            OnChainTx::ConfirmChannel { .. } => kind::CONFIRM_CHANNEL,
            OnChainTx::CooperativeClose { .. } => kind::COOPERATIVE_CLOSE,
            OnChainTx::UnilateralClose { .. } => kind::UNILATERAL_CLOSE,
            OnChainTx::Challenge { .. } => kind::CHALLENGE,
            OnChainTx::FinalizeClose { .. } => kind::FINALIZE_CLOSE,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            OnChainTx::RegisterDid {
                did,
                document,
                multiaddr,
                reported_energy,
            } => {
                w.put(did).put(document).put(multiaddr).u64(*reported_energy);
            }
            OnChainTx::RevokeDid { did } => {
                w.put(did);
            }
            OnChainTx::AddIssuer { issuer_did } => {
                w.put(issuer_did);
            }
            OnChainTx::ConfirmChannel { terms } => {
                w.put(terms);
            }
            OnChainTx::CooperativeClose {
                channel_id,
                pair,
                counter_signature,
            } => {
                w.put(channel_id).option(pair.as_ref()).put(counter_signature);
            }
            OnChainTx::UnilateralClose { channel_id, pair } => {
                w.put(channel_id).option(pair.as_ref());
            }
            OnChainTx::Challenge { channel_id, pair } => {
                w.put(channel_id).put(pair);
            }
            OnChainTx::FinalizeClose { channel_id } => {
                w.put(channel_id);
            }
        }
        w.into_bytes()
    }

    /// Decode a payload for a kind byte. `Ok(None)` means the kind is unknown.
    pub fn from_parts(kind_byte: u8, payload: &[u8]) -> Result<Option<Self>, DecodeError> {
        let mut r = Reader::new(payload);
        let tx = match kind_byte {
            kind::REGISTER_DID => OnChainTx::RegisterDid {
                did: r.get()?,
                document: r.get()?,
                multiaddr: r.get()?,
                reported_energy: r.u64()?,
            },
            kind::REVOKE_DID => OnChainTx::RevokeDid { did: r.get()? },
            kind::ADD_ISSUER => OnChainTx::AddIssuer {
                issuer_did: r.get()?,
            },
            kind::CONFIRM_CHANNEL => OnChainTx::ConfirmChannel { terms: r.get()? },
            kind::COOPERATIVE_CLOSE => OnChainTx::CooperativeClose {
                channel_id: r.get()?,
                pair: r.option()?,
                counter_signature: r.get()?,
            },
            kind::UNILATERAL_CLOSE => OnChainTx::UnilateralClose {
                channel_id: r.get()?,
                pair: r.option()?,
            },
            kind::CHALLENGE => OnChainTx::Challenge {
                channel_id: r.get()?,
                pair: r.get()?,
            },
            kind::FINALIZE_CLOSE => OnChainTx::FinalizeClose {
                channel_id: r.get()?,
            },
            _ => return Ok(None),
        };
        r.finish()?;
        Ok(Some(tx))
    }

    pub fn sign(&self, keypair: &KeyPair) -> SignedOnChainTx {
        let kind = self.kind();
        let payload = self.payload();
        let sender = keypair.address();
        let signature = keypair.sign(&signing_message(kind, &payload, &sender));
        SignedOnChainTx {
            kind,
            payload,
            sender,
            sender_key: *keypair.public_key(),
            signature,
        }
    }
}

fn signing_message(kind: u8, payload: &[u8], sender: &Address) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(ONCHAIN_TX_TAG).u8(kind).bytes(payload).put(sender);
    w.into_bytes()
}

/// Message a counterparty signs to approve a cooperative close.
pub fn close_approval_message(channel_id: &ChannelId, pair: Option<&OffChainTxPair>) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CLOSE_APPROVAL_TAG).put(channel_id).option(pair);
    w.into_bytes()
}

pub fn approve_close(keypair: &KeyPair, channel_id: &ChannelId, pair: Option<&OffChainTxPair>) -> Signature {
    keypair.sign(&close_approval_message(channel_id, pair))
}

/// Wire form: kind byte, payload, sender address, sender key, signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedOnChainTx {
    pub kind: u8,
    #[serde(with = "hex_vec")]
    pub payload: Vec<u8>,
    pub sender: Address,
    pub sender_key: PublicKey,
    pub signature: Signature,
}

impl SignedOnChainTx {
    pub fn verify_signature(&self) -> bool {
        derive_address(&self.sender_key) == self.sender
            && verify(
                &self.sender_key,
                &signing_message(self.kind, &self.payload, &self.sender),
                &self.signature,
            )
    }
}

impl Encode for SignedOnChainTx {
    fn encode(&self, w: &mut Writer) {
        w.u8(self.kind)
            .bytes(&self.payload)
            .put(&self.sender)
            .put(&self.sender_key)
            .put(&self.signature);
    }
}

impl Decode for SignedOnChainTx {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SignedOnChainTx {
            kind: r.u8()?,
            payload: r.bytes()?.to_vec(),
            sender: r.get()?,
            sender_key: r.get()?,
            signature: r.get()?,
        })
    }
}

mod hex_vec {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(D::Error::custom)
    }
}
