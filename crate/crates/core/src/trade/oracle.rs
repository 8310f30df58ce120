//! Brute-force settlement oracle.
//!
//! Recomputes what a channel should settle to from the raw off-chain log and
//! the ledger parameters, without using the ledger's own settlement code.
//! Tests compare its answer against the ledger state.

use std::collections::BTreeMap;

use crate::channel::{ExchangeId, SignedOffChainTx, ValueKind};
use crate::identity::{Address, PublicKey};
use crate::ledger::{AccountState, LedgerConfig};

/// One side of the channel as the oracle sees it.
#[derive(Debug, Clone, Copy)]
pub struct Party {
    pub address: Address,
    pub key: PublicKey,
}

/// Energy and credits accumulated by the first `iteration` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Totals {
    pub iteration: u64,
    pub energy: u64,
    pub credits: u64,
}

#[derive(Debug, Clone)]
pub struct ChannelLog {
    by_iteration: BTreeMap<u64, (Option<u64>, Option<u64>)>,
    unit_price: u64,
}

impl ChannelLog {
    /// Keep only correctly signed halves of this exchange between these
    /// parties. Later duplicates of a half are ignored.
    pub fn new(
        log: &[SignedOffChainTx],
        exchange_id: ExchangeId,
        seller: Party,
        buyer: Party,
        unit_price: u64,
    ) -> Self {
        let mut by_iteration: BTreeMap<u64, (Option<u64>, Option<u64>)> = BTreeMap::new();
        for stx in log {
            let tx = &stx.tx;
            if tx.exchange_id != exchange_id {
                continue;
            }
            let slot = by_iteration.entry(tx.iteration).or_default();
            match tx.value_kind {
                ValueKind::EnergyUnits
                    if tx.sender == seller.address
                        && tx.receiver == buyer.address
                        && stx.verify_with(&seller.key)
                        && slot.0.is_none() =>
                {
                    slot.0 = Some(tx.value)
                }
                ValueKind::CreditScore
                    if tx.sender == buyer.address
                        && tx.receiver == seller.address
                        && stx.verify_with(&buyer.key)
                        && slot.1.is_none() =>
                {
                    slot.1 = Some(tx.value)
                }
                _ => {}
            }
        }
        ChannelLog {
            by_iteration,
            unit_price,
        }
    }

    /// Walk iterations from 1, summing per-iteration increments, and stop
    /// at the first gap, missing half or wrong increment, or after `limit`.
    pub fn totals_upto(&self, limit: u64) -> Totals {
        let mut t = Totals::default();
        let (mut prev_e, mut prev_c) = (0u64, 0u64);
        for i in 1..=limit {
            let Some(&(Some(e), Some(c))) = self.by_iteration.get(&i) else {
                break;
            };
            let (Some(de), Some(dc)) = (e.checked_sub(prev_e), c.checked_sub(prev_c)) else {
                break;
            };
            if de != 1 || dc != self.unit_price {
                break;
            }
            t.iteration = i;
            t.energy += de;
            t.credits += dc;
            prev_e = e;
            prev_c = c;
        }
        t
    }

    pub fn latest(&self) -> Totals {
        self.totals_upto(u64::MAX)
    }
}

/// Expected accounts after settling `totals` with the given cheaters.
pub fn settle(
    config: &LedgerConfig,
    seller: AccountState,
    buyer: AccountState,
    totals: Totals,
    seller_cheated: bool,
    buyer_cheated: bool,
) -> (AccountState, AccountState) {
    let credits = totals.credits as i64;
    let incentive = |credit: i64, cheated: bool| {
        if cheated {
            let mut c = credit;
            for _ in 0..config.fraud_penalty {
                if c > config.credit_floor {
                    c -= 1;
                }
            }
            c
        } else {
            credit + config.honesty_bonus
        }
    };
    let s = AccountState {
        credit_score: incentive(seller.credit_score + credits, seller_cheated),
        energy_level: seller.energy_level - totals.energy,
    };
    let b = AccountState {
        credit_score: incentive(buyer.credit_score - credits, buyer_cheated),
        energy_level: buyer.energy_level + totals.energy,
    };
    (s, b)
}
