use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{hex_array, Decode, DecodeError, Encode, Reader, Writer};
use crate::identity::{derive_address, verify, Address, KeyPair, PublicKey, Signature};

macro_rules! id16 {
    ($name:ident, $field:literal) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(#[serde(with = "hex_array")] pub [u8; 16]);

        impl $name {
            /// Deterministic id from arbitrary labelling material.
            pub fn derive(parts: &[&[u8]]) -> Self {
                let mut all: Vec<&[u8]> = vec![$field.as_bytes()];
                all.extend_from_slice(parts);
                let d = crate::codec::sha256(&all);
                let mut out = [0u8; 16];
                out.copy_from_slice(&d[..16]);
                $name(out)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), hex::encode(self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }

        impl Encode for $name {
            fn encode(&self, w: &mut Writer) {
                w.bytes(&self.0);
            }
        }

        impl Decode for $name {
            fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                r.array($field).map($name)
            }
        }
    };
}

id16!(ExchangeId, "exchange_id");
id16!(ChannelId, "channel_id");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    EnergyUnits,
    CreditScore,
}

impl ValueKind {
    pub fn tag(self) -> u8 {
        match self {
            ValueKind::EnergyUnits => 1,
            ValueKind::CreditScore => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(ValueKind::EnergyUnits),
            2 => Some(ValueKind::CreditScore),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum InvalidField {
    #[error("iteration must be at least 1")]
    ZeroIteration,
    #[error("value must be at least 1")]
    ZeroValue,
    #[error("sender and receiver must differ")]
    SelfTransfer,
}

/// One half of a channel iteration.
///
/// `value` is cumulative over the exchange: after iteration `n` the energy
/// stream carries `n` units and the credit stream `n * unit_price` credits, so
/// the latest pair alone determines the settlement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffChainTx {
    pub exchange_id: ExchangeId,
    pub iteration: u64,
    pub sender: Address,
    pub receiver: Address,
    pub value: u64,
    pub value_kind: ValueKind,
}

impl OffChainTx {
    pub fn validate(&self) -> Result<(), InvalidField> {
        if self.iteration == 0 {
            return Err(InvalidField::ZeroIteration);
        }
        if self.value == 0 {
            return Err(InvalidField::ZeroValue);
        }
        if self.sender == self.receiver {
            return Err(InvalidField::SelfTransfer);
        }
        Ok(())
    }
}

pub fn build_offchain_tx(
    exchange_id: ExchangeId,
    iteration: u64,
    sender: Address,
    receiver: Address,
    value: u64,
    value_kind: ValueKind,
) -> Result<OffChainTx, InvalidField> {
    let tx = OffChainTx {
        exchange_id,
        iteration,
        sender,
        receiver,
        value,
        value_kind,
    };
    tx.validate()?;
    Ok(tx)
}

impl Encode for OffChainTx {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.exchange_id);
        w.bytes(&self.iteration.to_be_bytes());
        w.put(&self.sender).put(&self.receiver);
        w.bytes(&self.value.to_be_bytes());
        w.bytes(&[self.value_kind.tag()]);
    }
}

impl Decode for OffChainTx {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let exchange_id = r.get()?;
        let iteration = u64::from_be_bytes(r.array("iteration")?);
        let sender = r.get()?;
        let receiver = r.get()?;
        let value = u64::from_be_bytes(r.array("value")?);
        let [kind] = r.array::<1>("value_kind")?;
        let value_kind = ValueKind::from_tag(kind)
            .ok_or_else(|| DecodeError::invalid("value_kind", format!("tag {kind}")))?;
        Ok(OffChainTx {
            exchange_id,
            iteration,
            sender,
            receiver,
            value,
            value_kind,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedOffChainTx {
    pub tx: OffChainTx,
    pub signature: Signature,
}

impl SignedOffChainTx {
    /// Signature check against a key that must also own `tx.sender`.
    pub fn verify_with(&self, sender_key: &PublicKey) -> bool {
        derive_address(sender_key) == self.tx.sender
            && verify(sender_key, &self.tx.canonical_bytes(), &self.signature)
    }

    pub fn serialized_len(&self) -> usize {
        self.canonical_bytes().len()
    }
}

impl Encode for SignedOffChainTx {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.tx).put(&self.signature);
    }
}

impl Decode for SignedOffChainTx {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(SignedOffChainTx {
            tx: r.get()?,
            signature: r.get()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("signing key does not own the sender address")]
pub struct NotSender;

pub fn sign_offchain_tx(keypair: &KeyPair, tx: OffChainTx) -> Result<SignedOffChainTx, NotSender> {
    if keypair.address() != tx.sender {
        return Err(NotSender);
    }
    Ok(SignedOffChainTx {
        signature: keypair.sign(&tx.canonical_bytes()),
        tx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxRejection {
    BadSig,
    WrongIteration,
    InvalidField(InvalidField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxCheck {
    Accepted,
    Rejected(TxRejection),
}

impl TxCheck {
    pub fn is_accepted(&self) -> bool {
        matches!(self, TxCheck::Accepted)
    }
}

pub fn check_offchain_tx(
    stx: &SignedOffChainTx,
    expected_iteration: u64,
    sender_key: &PublicKey,
) -> TxCheck {
    if let Err(e) = stx.tx.validate() {
        return TxCheck::Rejected(TxRejection::InvalidField(e));
    }
    if !stx.verify_with(sender_key) {
        return TxCheck::Rejected(TxRejection::BadSig);
    }
    if stx.tx.iteration != expected_iteration {
        return TxCheck::Rejected(TxRejection::WrongIteration);
    }
    TxCheck::Accepted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum PairError {
    #[error("energy half must carry EnergyUnits and credit half CreditScore")]
    WrongKinds,
    #[error("halves belong to different exchanges")]
    ExchangeMismatch,
    #[error("halves carry different iterations")]
    IterationMismatch,
    #[error("sender/receiver roles are not mirrored")]
    RoleMismatch,
    #[error("invalid field: {0}")]
    InvalidField(InvalidField),
}

/// Both halves of one iteration: seller→buyer energy and buyer→seller credit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffChainTxPair {
    pub energy_tx: SignedOffChainTx,
    pub credit_tx: SignedOffChainTx,
}

impl OffChainTxPair {
    pub fn iteration(&self) -> u64 {
        self.energy_tx.tx.iteration
    }

    pub fn exchange_id(&self) -> ExchangeId {
        self.energy_tx.tx.exchange_id
    }

    pub fn seller(&self) -> Address {
        self.energy_tx.tx.sender
    }

    pub fn buyer(&self) -> Address {
        self.credit_tx.tx.sender
    }

    pub fn energy_units(&self) -> u64 {
        self.energy_tx.tx.value
    }

    pub fn credits(&self) -> u64 {
        self.credit_tx.tx.value
    }

    /// Structural consistency; signatures are checked separately.
    pub fn check_consistency(&self) -> Result<(), PairError> {
        let (e, c) = (&self.energy_tx.tx, &self.credit_tx.tx);
        e.validate().map_err(PairError::InvalidField)?;
        c.validate().map_err(PairError::InvalidField)?;
        if e.value_kind != ValueKind::EnergyUnits || c.value_kind != ValueKind::CreditScore {
            return Err(PairError::WrongKinds);
        }
        if e.exchange_id != c.exchange_id {
            return Err(PairError::ExchangeMismatch);
        }
        if e.iteration != c.iteration {
            return Err(PairError::IterationMismatch);
        }
        if e.sender != c.receiver || e.receiver != c.sender {
            return Err(PairError::RoleMismatch);
        }
        Ok(())
    }
}

impl Encode for OffChainTxPair {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.energy_tx).put(&self.credit_tx);
    }
}

impl Decode for OffChainTxPair {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(OffChainTxPair {
            energy_tx: r.get()?,
            credit_tx: r.get()?,
        })
    }
}
