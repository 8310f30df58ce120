//! Off-chain state channel: transaction format and per-party replicas.

mod state;
mod tx;

pub use state::{ChannelError, CloseProposal, LocalChannelState, Role, TimeoutAction};
pub use tx::{
    build_offchain_tx, check_offchain_tx, sign_offchain_tx, ChannelId, ExchangeId, InvalidField,
    NotSender, OffChainTx, OffChainTxPair, PairError, SignedOffChainTx, TxCheck, TxRejection,
    ValueKind,
};
