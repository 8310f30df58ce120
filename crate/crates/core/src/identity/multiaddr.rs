use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MultiaddrError {
    #[error("multiaddr is empty")]
    Empty,
    #[error("multiaddr must start with '/'")]
    MissingLeadingSlash,
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("protocol {0} is missing its value")]
    MissingValue(&'static str),
    #[error("invalid value {value:?} for protocol {protocol}")]
    InvalidValue { protocol: &'static str, value: String },
}

/// Supported address layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Ip4,
    Ip6,
    Dns4,
    Dns6,
    Tcp,
    Udp,
    P2p,
}

impl Protocol {
    pub fn tag(self) -> &'static str {
        match self {
            Protocol::Ip4 => "ip4",
            Protocol::Ip6 => "ip6",
            Protocol::Dns4 => "dns4",
            Protocol::Dns6 => "dns6",
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::P2p => "p2p",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "ip4" => Protocol::Ip4,
            "ip6" => Protocol::Ip6,
            "dns4" => Protocol::Dns4,
            "dns6" => Protocol::Dns6,
            "tcp" => Protocol::Tcp,
            "udp" => Protocol::Udp,
            "p2p" => Protocol::P2p,
            _ => return None,
        })
    }

    fn validate(self, value: &str) -> bool {
        match self {
            Protocol::Ip4 => Ipv4Addr::from_str(value).is_ok(),
            Protocol::Ip6 => Ipv6Addr::from_str(value).is_ok(),
            Protocol::Tcp | Protocol::Udp => value.parse::<u16>().is_ok(),
            Protocol::Dns4 | Protocol::Dns6 => {
                !value.is_empty()
                    && value
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
            }
            // base58btc peer id
            Protocol::P2p => {
                !value.is_empty()
                    && value
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() && !"0OIl".contains(c))
            }
        }
    }
}

/// Layered network address such as `/ip4/127.0.0.1/tcp/10333/p2p/12D3Koo…`.
#[derive(Clone, PartialEq, Eq)]
pub struct Multiaddr {
    segments: Vec<(Protocol, String)>,
}

impl Multiaddr {
    pub fn parse(s: &str) -> Result<Self, MultiaddrError> {
        if s.is_empty() {
            return Err(MultiaddrError::Empty);
        }
        let rest = s
            .strip_prefix('/')
            .ok_or(MultiaddrError::MissingLeadingSlash)?;
        let mut parts = rest.split('/');
        let mut segments = Vec::new();
        while let Some(tag) = parts.next() {
            let protocol =
                Protocol::from_tag(tag).ok_or_else(|| MultiaddrError::UnknownProtocol(tag.into()))?;
            let value = parts
                .next()
                .ok_or(MultiaddrError::MissingValue(protocol.tag()))?;
            if !protocol.validate(value) {
                return Err(MultiaddrError::InvalidValue {
                    protocol: protocol.tag(),
                    value: value.into(),
                });
            }
            segments.push((protocol, value.to_string()));
        }
        Ok(Multiaddr { segments })
    }

    pub fn segments(&self) -> &[(Protocol, String)] {
        &self.segments
    }

    /// Loopback TCP address with a peer id, the form robots advertise.
    pub fn tcp_loopback(port: u16, peer_id: &str) -> Result<Self, MultiaddrError> {
        Multiaddr::parse(&format!("/ip4/127.0.0.1/tcp/{port}/p2p/{peer_id}"))
    }
}

impl fmt::Display for Multiaddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, v) in &self.segments {
            write!(f, "/{}/{}", p.tag(), v)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Multiaddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multiaddr({self})")
    }
}

impl FromStr for Multiaddr {
    type Err = MultiaddrError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Multiaddr::parse(s)
    }
}

impl Serialize for Multiaddr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Multiaddr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Multiaddr::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Encode for Multiaddr {
    fn encode(&self, w: &mut Writer) {
        w.str(&self.to_string());
    }
}

impl Decode for Multiaddr {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let s = r.string("multiaddr")?;
        Multiaddr::parse(&s).map_err(|e| DecodeError::invalid("multiaddr", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str =
        "/ip4/127.0.0.1/tcp/10333/p2p/12D3KooWDTptSsELd2qug4rcXcFoRZNd7mT6NT3cPnZAJ7mH8ydR";

    #[test]
    fn parses_and_renders_example() {
        let m = Multiaddr::parse(EXAMPLE).unwrap();
        assert_eq!(m.segments().len(), 3);
        assert_eq!(m.to_string(), EXAMPLE);
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(Multiaddr::parse(""), Err(MultiaddrError::Empty));
        assert_eq!(
            Multiaddr::parse("ip4/1.2.3.4"),
            Err(MultiaddrError::MissingLeadingSlash)
        );
        assert_eq!(
            Multiaddr::parse("/ip4"),
            Err(MultiaddrError::MissingValue("ip4"))
        );
        assert!(matches!(
            Multiaddr::parse("/quic/1"),
            Err(MultiaddrError::UnknownProtocol(_))
        ));
        assert!(matches!(
            Multiaddr::parse("/ip4/300.0.0.1"),
            Err(MultiaddrError::InvalidValue { .. })
        ));
        assert!(matches!(
            Multiaddr::parse("/ip4/1.2.3.4/tcp/70000"),
            Err(MultiaddrError::InvalidValue { .. })
        ));
        assert!(Multiaddr::parse("/ip4/1.2.3.4/").is_err());
    }

    #[test]
    fn canonical_roundtrip() {
        let m = Multiaddr::parse("/ip6/::1/udp/9000").unwrap();
        assert_eq!(Multiaddr::from_canonical_bytes(&m.canonical_bytes()).unwrap(), m);
    }
}
