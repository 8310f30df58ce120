//! Keys, addresses, `did:robo` identifiers and DID documents.

mod did;
mod document;
mod keys;
mod multiaddr;

pub use did::{create_did, parse_did, Address, Did, DidParseError, DID_METHOD, DID_SCHEME};
pub use document::{
    build_did_document, build_did_document_with_controller, peer_id, DidDocument,
    AUTHENTICATION_METHOD,
};
pub use keys::{
    derive_address, generate_keypair, sign, verify, KeyPair, PublicKey, Signature, PUBLIC_KEY_LEN,
    SIGNATURE_LEN,
};
pub use multiaddr::{Multiaddr, MultiaddrError, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("seed does not map to a valid nonzero secret scalar")]
    InvalidSecretKey,
    #[error("bytes are not a valid compressed or uncompressed secp256k1 point")]
    InvalidPublicKey,
    #[error("DID does not match the keypair's address")]
    DidKeyMismatch,
    #[error("malformed DID: {0}")]
    MalformedDid(#[from] DidParseError),
}

/// Keypair, DID and a loopback endpoint derived from one seed.
#[derive(Debug, Clone)]
pub struct Identity {
    pub keypair: KeyPair,
    pub did: Did,
    pub endpoint: Multiaddr,
}

impl Identity {
    pub fn from_seed(seed: &[u8; 32], port: u16) -> Result<Self, IdentityError> {
        let keypair = generate_keypair(seed)?;
        let did = create_did(keypair.address());
        let endpoint = Multiaddr::tcp_loopback(port, &peer_id(keypair.public_key()))
            .expect("generated multiaddr is well formed");
        Ok(Identity {
            keypair,
            did,
            endpoint,
        })
    }

    /// Seed derived by hashing a label, for tests and simulations.
    pub fn from_label(label: &str) -> Self {
        let seed = crate::codec::sha256(&[b"robocomm/identity", label.as_bytes()]);
        Identity::from_seed(&seed, 10333).expect("hash output is a valid scalar")
    }

    pub fn address(&self) -> Address {
        self.did.address()
    }

    pub fn document(&self, now: u64) -> DidDocument {
        build_did_document(&self.did, &self.keypair, self.endpoint.clone(), now)
            .expect("identity is self-consistent")
    }
}
