//! Robot-to-robot authentication and energy trading over state channels.

pub mod codec;
pub mod identity;
pub mod credentials;
pub mod channel;
pub mod ledger;
pub mod trade;
pub mod swarm_sim;
pub mod bench;
