use serde::{Deserialize, Serialize};

use super::{create_did, derive_address, Did, IdentityError, KeyPair, Multiaddr, PublicKey};
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};

pub const AUTHENTICATION_METHOD: &str = "EcdsaSecp256k1VerificationKey2019";

/// Metadata record a robot publishes for its DID.
///
/// JSON field order matches the canonical byte order. Only the canonical
/// bytes are ever signed or measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidDocument {
    pub id: Did,
    pub verification_key: PublicKey,
    pub authentication_method: String,
    pub controller: Did,
    pub service_endpoint: Multiaddr,
    pub created_at: u64,
}

impl DidDocument {
    /// `id` is derived from `verification_key`.
    pub fn is_bound(&self) -> bool {
        derive_address(&self.verification_key) == self.id.address()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    pub fn serialized_len(&self) -> usize {
        self.canonical_bytes().len()
    }
}

/// Self-controlled document for `did`.
pub fn build_did_document(
    did: &Did,
    keypair: &KeyPair,
    endpoint: Multiaddr,
    now: u64,
) -> Result<DidDocument, IdentityError> {
    build_did_document_with_controller(did, keypair, *did, endpoint, now)
}

pub fn build_did_document_with_controller(
    did: &Did,
    keypair: &KeyPair,
    controller: Did,
    endpoint: Multiaddr,
    now: u64,
) -> Result<DidDocument, IdentityError> {
    if create_did(keypair.address()) != *did {
        return Err(IdentityError::DidKeyMismatch);
    }
    Ok(DidDocument {
        id: *did,
        verification_key: *keypair.public_key(),
        authentication_method: AUTHENTICATION_METHOD.to_string(),
        controller,
        service_endpoint: endpoint,
        created_at: now,
    })
}

/// libp2p-style peer id (base58 sha2-256 multihash of the compressed key).
pub fn peer_id(public_key: &PublicKey) -> String {
    let digest = crate::codec::sha256(&[&public_key.to_bytes()]);
    let mut mh = vec![0x12, 0x20];
    mh.extend_from_slice(&digest);
    bs58::encode(mh).into_string()
}

impl Encode for DidDocument {
    fn encode(&self, w: &mut Writer) {
        w.put(&self.id)
            .put(&self.verification_key)
            .str(&self.authentication_method)
            .put(&self.controller)
            .put(&self.service_endpoint)
            .u64(self.created_at);
    }
}

impl Decode for DidDocument {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(DidDocument {
            id: r.get()?,
            verification_key: r.get()?,
            authentication_method: r.string("authentication_method")?,
            controller: r.get()?,
            service_endpoint: r.get()?,
            created_at: r.u64()?,
        })
    }
}
