use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};

pub const DID_SCHEME: &str = "did";
pub const DID_METHOD: &str = "robo";

/// 20-byte account identifier, rendered as `0x` + 40 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn parse(s: &str) -> Result<Self, DidParseError> {
        let hex_part = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .ok_or(DidParseError::MissingHexPrefix)?;
        if hex_part.len() != 40 {
            return Err(DidParseError::BadSpecifierLength(hex_part.len()));
        }
        let mut out = [0u8; 20];
        hex::decode_to_slice(hex_part, &mut out).map_err(|_| DidParseError::BadHex)?;
        Ok(Address(out))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl FromStr for Address {
    type Err = DidParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Address::parse(s)
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Address::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Encode for Address {
    fn encode(&self, w: &mut Writer) {
        w.bytes(&self.0);
    }
}

impl Decode for Address {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        r.array("address").map(Address)
    }
}

/// Why a string failed to parse as a `did:robo` identifier.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DidParseError {
    #[error("missing or wrong scheme (expected \"did\")")]
    WrongScheme,
    #[error("unsupported DID method {0:?}")]
    UnsupportedMethod(String),
    #[error("method specifier must start with 0x")]
    MissingHexPrefix,
    #[error("method specifier has {0} hex digits, expected 40")]
    BadSpecifierLength(usize),
    #[error("method specifier is not valid hex")]
    BadHex,
}

impl DidParseError {
    /// Stable numeric reason code, used across the C boundary.
    pub fn code(&self) -> u8 {
        match self {
            DidParseError::WrongScheme => 1,
            DidParseError::UnsupportedMethod(_) => 2,
            DidParseError::MissingHexPrefix => 3,
            DidParseError::BadSpecifierLength(_) => 4,
            DidParseError::BadHex => 5,
        }
    }
}

/// `did:robo:0x<address>`. The specifier is stored as raw bytes, so equality is
/// case-insensitive with respect to the textual hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Did {
    address: Address,
}

impl Did {
    pub fn address(&self) -> Address {
        self.address
    }

    pub fn method(&self) -> &'static str {
        DID_METHOD
    }

    pub fn method_specifier(&self) -> String {
        self.address.to_string()
    }
}

pub fn create_did(address: Address) -> Did {
    Did { address }
}

pub fn parse_did(s: &str) -> Result<Did, DidParseError> {
    let mut parts = s.splitn(3, ':');
    let scheme = parts.next().unwrap_or_default();
    if scheme != DID_SCHEME {
        return Err(DidParseError::WrongScheme);
    }
    let method = parts.next().ok_or(DidParseError::WrongScheme)?;
    if method != DID_METHOD {
        return Err(DidParseError::UnsupportedMethod(method.to_string()));
    }
    let specifier = parts.next().unwrap_or_default();
    Ok(Did {
        address: Address::parse(specifier)?,
    })
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{DID_SCHEME}:{DID_METHOD}:{}", self.address)
    }
}

impl fmt::Debug for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Did({self})")
    }
}

impl FromStr for Did {
    type Err = DidParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_did(s)
    }
}

impl Serialize for Did {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Did {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_did(&s).map_err(serde::de::Error::custom)
    }
}

impl Encode for Did {
    fn encode(&self, w: &mut Writer) {
        w.str(&self.to_string());
    }
}

impl Decode for Did {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let s = r.string("did")?;
        parse_did(&s).map_err(|e| DecodeError::invalid("did", e.to_string()))
    }
}
