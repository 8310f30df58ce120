use std::fmt;

use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest, Keccak256};

use super::{Address, IdentityError};
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};

pub const PUBLIC_KEY_LEN: usize = 33;
pub const SIGNATURE_LEN: usize = 64;

/// secp256k1 keypair. The secret scalar never appears in `Debug` output or in
/// any document produced by this crate.
#[derive(Clone)]
pub struct KeyPair {
    secret: SigningKey,
    public: PublicKey,
}

impl KeyPair {
    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn address(&self) -> Address {
        derive_address(&self.public)
    }

    /// Raw secret scalar, for key files only.
    pub fn secret_bytes(&self) -> [u8; 32] {
        self.secret.to_bytes().into()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        sign(self, message)
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Deterministically derive a keypair from 32 bytes of seed material.
///
/// The seed is used directly as the secret scalar, so it must be a nonzero
/// value below the group order.
pub fn generate_keypair(seed: &[u8; 32]) -> Result<KeyPair, IdentityError> {
    let secret = SigningKey::from_slice(seed).map_err(|_| IdentityError::InvalidSecretKey)?;
    let public = PublicKey(*secret.verifying_key());
    Ok(KeyPair { secret, public })
}

/// Compressed SEC1 public key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IdentityError> {
        VerifyingKey::from_sec1_bytes(bytes)
            .map(PublicKey)
            .map_err(|_| IdentityError::InvalidPublicKey)
    }

    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        let point = self.0.to_encoded_point(true);
        point.as_bytes().try_into().expect("compressed point is 33 bytes")
    }

    pub fn to_uncompressed(&self) -> [u8; 65] {
        let point = self.0.to_encoded_point(false);
        point.as_bytes().try_into().expect("uncompressed point is 65 bytes")
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        PublicKey::from_bytes(&bytes).map_err(D::Error::custom)
    }
}

impl Encode for PublicKey {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.to_bytes());
    }
}

impl Decode for PublicKey {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let b = r.bytes()?;
        PublicKey::from_bytes(b).map_err(|e| DecodeError::invalid("public_key", e.to_string()))
    }
}

/// Compact `r || s` ECDSA signature (low-S normalized).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..8]))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::codec::hex_array::deserialize(d).map(Signature)
    }
}

impl Encode for Signature {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.0);
    }
}

impl Decode for Signature {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.array("signature").map(Signature)
    }
}

/// ECDSA over secp256k1 with SHA-256 and RFC 6979 nonces.
pub fn sign(keypair: &KeyPair, message: &[u8]) -> Signature {
    let sig: k256::ecdsa::Signature = keypair.secret.sign(message);
    Signature(sig.to_bytes().into())
}

/// Never panics; malformed encodings simply fail verification.
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(sig) = k256::ecdsa::Signature::from_slice(&signature.0) else {
        return false;
    };
    // Reject the malleable high-S twin of every valid signature.
    if sig.normalize_s().is_some() {
        return false;
    }
    public_key.0.verify(message, &sig).is_ok()
}

/// Trailing 20 bytes of Keccak-256 over the uncompressed point (without the
/// `0x04` tag byte).
pub fn derive_address(public_key: &PublicKey) -> Address {
    let uncompressed = public_key.to_uncompressed();
    let hash = Keccak256::digest(&uncompressed[1..]);
    let mut out = [0u8; 20];
    out.copy_from_slice(&hash[12..]);
    Address(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(b: u8) -> [u8; 32] {
        let mut s = [0u8; 32];
        s[31] = b;
        s[0] = 0x11;
        s
    }

    #[test]
    fn zero_seed_is_rejected() {
        assert_eq!(
            generate_keypair(&[0u8; 32]).unwrap_err(),
            IdentityError::InvalidSecretKey
        );
    }

    #[test]
    fn seed_above_group_order_is_rejected() {
        assert!(generate_keypair(&[0xff; 32]).is_err());
    }

    #[test]
    fn keygen_is_deterministic() {
        let a = generate_keypair(&seed(1)).unwrap();
        let b = generate_keypair(&seed(1)).unwrap();
        assert_eq!(a.public_key(), b.public_key());
        assert_eq!(a.secret_bytes(), b.secret_bytes());
    }

    #[test]
    fn one_bit_seed_difference_gives_distinct_keys() {
        let s1 = seed(1);
        let mut s2 = s1;
        s2[31] ^= 0x02;
        let a = generate_keypair(&s1).unwrap();
        let b = generate_keypair(&s2).unwrap();
        assert_ne!(a.public_key(), b.public_key());
    }

    #[test]
    fn known_address_vector() {
        // Secret key 1 is the generator; its Ethereum address is well known.
        let mut one = [0u8; 32];
        one[31] = 1;
        let kp = generate_keypair(&one).unwrap();
        assert_eq!(
            kp.address().to_string(),
            "0x7e5f4552091a69125d5dfcb7b8c2659029395bdf"
        );
    }

    #[test]
    fn sign_verify_roundtrip_and_wrong_key() {
        let k1 = generate_keypair(&seed(1)).unwrap();
        let k2 = generate_keypair(&seed(2)).unwrap();
        let sig = k1.sign(b"hello");
        assert!(verify(k1.public_key(), b"hello", &sig));
        assert!(!verify(k2.public_key(), b"hello", &sig));
        assert!(!verify(k1.public_key(), b"hellp", &sig));
    }

    #[test]
    fn signatures_are_deterministic() {
        let k1 = generate_keypair(&seed(1)).unwrap();
        assert_eq!(k1.sign(b"m"), k1.sign(b"m"));
    }

    #[test]
    fn every_single_bit_flip_of_a_signature_fails() {
        let k1 = generate_keypair(&seed(7)).unwrap();
        let sig = k1.sign(b"hello");
        for bit in 0..SIGNATURE_LEN * 8 {
            let mut bad = sig;
            bad.0[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify(k1.public_key(), b"hello", &bad), "bit {bit}");
        }
    }

    #[test]
    fn malformed_signature_returns_false() {
        let k1 = generate_keypair(&seed(1)).unwrap();
        assert!(!verify(k1.public_key(), b"x", &Signature([0u8; 64])));
        assert!(!verify(k1.public_key(), b"x", &Signature([0xff; 64])));
    }

    #[test]
    fn empty_message_is_signable() {
        let k1 = generate_keypair(&seed(3)).unwrap();
        let sig = k1.sign(b"");
        assert!(verify(k1.public_key(), b"", &sig));
    }

    #[test]
    fn debug_does_not_leak_secret() {
        let k1 = generate_keypair(&seed(1)).unwrap();
        let dbg = format!("{k1:?}");
        assert!(!dbg.contains(&hex::encode(k1.secret_bytes())));
    }
}
