//! Deterministic snapshot file: genesis config plus the full log, sealed with
//! the state hash the log must reproduce.

use super::{Ledger, LedgerConfig, LedgerError, LogEntry};
use crate::codec::{Decode, DecodeError, Reader, Writer};

const MAGIC: &[u8; 8] = b"RCLEDGER";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a ledger snapshot")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u8),
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
    #[error("log entry {index} failed on replay: {error}")]
    Replay { index: usize, error: LedgerError },
    #[error("replayed state hash differs from the sealed hash")]
    HashMismatch,
}

impl Ledger {
    pub fn export_snapshot(&self) -> Vec<u8> {
        let mut w = Writer::new();
        for b in MAGIC {
            w.u8(*b);
        }
        w.u8(VERSION)
            .put(&self.config)
            .seq(&self.tx_log)
            .bytes(&self.state_hash());
        w.into_bytes()
    }

    pub fn import_snapshot(bytes: &[u8]) -> Result<Ledger, SnapshotError> {
        let mut r = Reader::new(bytes);
        for b in MAGIC {
            if r.u8().map_err(|_| SnapshotError::BadMagic)? != *b {
                return Err(SnapshotError::BadMagic);
            }
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let config = LedgerConfig::decode(&mut r)?;
        let log: Vec<LogEntry> = r.seq()?;
        let sealed: [u8; 32] = r.array("state_hash")?;
        r.finish()?;
        let ledger = Ledger::replay(config, &log)
            .map_err(|(index, error)| SnapshotError::Replay { index, error })?;
        if ledger.state_hash() != sealed {
            return Err(SnapshotError::HashMismatch);
        }
        Ok(ledger)
    }
}
