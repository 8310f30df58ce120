use std::fmt;

use serde::Serialize;

use crate::channel::Role;
use crate::ledger::{AccountState, Ledger};

use super::engine::{run_trade, Adversary, Defection, TradeReport};
use super::handshake::{discover, establish_channel};
use super::oracle::{self, ChannelLog, Totals};
use super::{select_seller, Bus, Deployment, LinkParams, TradeError, TradePolicy};

/// A scripted two-robot trade.
///
/// Text form, one `key = value` per line, `#` starts a comment:
///
/// ```text
/// name = buyer-withholds
/// units = 5
/// price = 2
/// defect = buyer withhold 5
/// ```
///
/// `defect` is `none`, `<buyer|seller> <withhold|offline|forge|replay>
/// <point>` or `<buyer|seller> stale-close <iteration>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub units: u64,
    pub unit_price: u64,
    pub delta_timeout: u64,
    pub challenge_period: u64,
    pub initial_credit: i64,
    pub fraud_penalty: i64,
    pub honesty_bonus: i64,
    pub seller_energy: u64,
    pub buyer_energy: u64,
    pub link_delay: u64,
    pub drop_prob: f64,
    pub defection: Option<Defection>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "honest".into(),
            units: 3,
            unit_price: 2,
            delta_timeout: 5,
            challenge_period: 10,
            initial_credit: 100,
            fraud_penalty: 5,
            honesty_bonus: 1,
            seller_energy: 40,
            buyer_energy: 2,
            link_delay: 0,
            drop_prob: 0.0,
            defection: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Trade(#[from] TradeError),
}

impl Scenario {
    pub const BUILTIN: [&'static str; 4] = ["honest", "buyer-withholds", "seller-stale-close", "peer-offline"];

    /// The canned demo scenarios, scaled to `units` iterations.
    pub fn builtin(name: &str, units: u64) -> Result<Self, ScenarioError> {
        let units = units.max(1);
        let defection = match name {
            "honest" => None,
            // Buyer takes the last unit and never pays for it.
            "buyer-withholds" => Some(Defection {
                role: Role::Buyer,
                adversary: Adversary::Withhold {
                    point: 2 * (units - 1) + 1,
                },
            }),
            "seller-stale-close" => Some(Defection {
                role: Role::Seller,
                adversary: Adversary::StaleClose {
                    iteration: units.min(2) - 1,
                },
            }),
            // Seller vanishes halfway through.
            "peer-offline" => Some(Defection {
                role: Role::Seller,
                adversary: Adversary::Offline {
                    point: 2 * (units / 2),
                },
            }),
            other => return Err(ScenarioError::Unknown(other.to_string())),
        };
        Ok(Scenario {
            name: name.to_string(),
            units,
            defection,
            ..Scenario::default()
        })
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |reason: String| ScenarioError::Parse { line, reason };
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key = value".into()))?;
            let int = |v: &str| v.parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
            let signed = |v: &str| v.parse::<i64>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "name" => sc.name = value.to_string(),
                "units" => sc.units = int(value)?,
                "price" => sc.unit_price = int(value)?,
                "delta" => sc.delta_timeout = int(value)?,
                "challenge_period" => sc.challenge_period = int(value)?,
                "initial_credit" => sc.initial_credit = signed(value)?,
                "fraud_penalty" => sc.fraud_penalty = signed(value)?,
                "honesty_bonus" => sc.honesty_bonus = signed(value)?,
                "seller_energy" => sc.seller_energy = int(value)?,
                "buyer_energy" => sc.buyer_energy = int(value)?,
                "link_delay" => sc.link_delay = int(value)?,
                "drop_prob" => {
                    sc.drop_prob = value
                        .parse::<f64>()
                        .ok()
                        .filter(|p| (0.0..=1.0).contains(p))
                        .ok_or_else(|| err("drop_prob must be in [0, 1]".into()))?
                }
                "defect" => sc.defection = parse_defection(value).map_err(err)?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        if sc.unit_price == 0 || sc.delta_timeout == 0 || sc.challenge_period == 0 {
            return Err(ScenarioError::Parse {
                line: 0,
                reason: "price, delta and challenge_period must be positive".into(),
            });
        }
        Ok(sc)
    }
}

fn parse_defection(value: &str) -> Result<Option<Defection>, String> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts == ["none"] {
        return Ok(None);
    }
    let [role, kind, n] = parts[..] else {
        return Err(format!("malformed defect {value:?}"));
    };
    let role = match role {
        "buyer" => Role::Buyer,
        "seller" => Role::Seller,
        other => return Err(format!("unknown role {other:?}")),
    };
    let n: u64 = n.parse().map_err(|e| format!("defect point: {e}"))?;
    let adversary = match kind {
        "withhold" => Adversary::Withhold { point: n },
        "offline" => Adversary::Offline { point: n },
        "forge" => Adversary::ForgeAttempt { point: n },
        "replay" => Adversary::ReplayStale { point: n },
        "stale-close" => Adversary::StaleClose { iteration: n },
        other => return Err(format!("unknown defection {other:?}")),
    };
    Ok(Some(Defection { role, adversary }))
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "units = {}", self.units)?;
        writeln!(f, "price = {}", self.unit_price)?;
        writeln!(f, "delta = {}", self.delta_timeout)?;
        writeln!(f, "challenge_period = {}", self.challenge_period)?;
        writeln!(f, "initial_credit = {}", self.initial_credit)?;
        writeln!(f, "fraud_penalty = {}", self.fraud_penalty)?;
        writeln!(f, "honesty_bonus = {}", self.honesty_bonus)?;
        writeln!(f, "seller_energy = {}", self.seller_energy)?;
        writeln!(f, "buyer_energy = {}", self.buyer_energy)?;
        writeln!(f, "link_delay = {}", self.link_delay)?;
        writeln!(f, "drop_prob = {}", self.drop_prob)?;
        let defect = match self.defection {
            None => "none".to_string(),
            Some(d) => {
                let role = match d.role {
                    Role::Buyer => "buyer",
                    Role::Seller => "seller",
                };
                let (kind, n) = match d.adversary {
                    Adversary::Honest => return writeln!(f, "defect = none"),
                    Adversary::Withhold { point } => ("withhold", point),
                    Adversary::Offline { point } => ("offline", point),
                    Adversary::ForgeAttempt { point } => ("forge", point),
                    Adversary::ReplayStale { point } => ("replay", point),
                    Adversary::StaleClose { iteration } => ("stale-close", iteration),
                };
                format!("{role} {kind} {n}")
            }
        };
        writeln!(f, "defect = {defect}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Balances {
    pub seller: AccountState,
    pub buyer: AccountState,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub report: TradeReport,
    /// Ledger accounts right after the channel opened.
    pub opening: Balances,
    /// What the oracle says the close should produce.
    pub expected: Balances,
    pub actual: Balances,
    pub expected_totals: (u64, u64, u64),
    pub seller_battery: u64,
    pub buyer_battery: u64,
    pub replay_ok: bool,
    #[serde(skip)]
    pub ledger: Ledger,
}

impl ScenarioResult {
    pub fn balances_match(&self) -> bool {
        self.expected.seller == self.actual.seller && self.expected.buyer == self.actual.buyer
    }
}

/// Full protocol run of `sc`: enrolment, discovery, selection, channel
/// establishment, the trade and settlement, checked against the oracle.
pub fn run_scenario(sc: &Scenario, seed: u64) -> Result<ScenarioResult, ScenarioError> {
    let mut dep = Deployment::new(&format!("scenario/{}/{seed}", sc.name), |c| {
        c.challenge_period = sc.challenge_period;
        c.initial_credit = sc.initial_credit;
        c.fraud_penalty = sc.fraud_penalty;
        c.honesty_bonus = sc.honesty_bonus;
    });
    let policy = TradePolicy {
        unit_price: sc.unit_price,
        delta_timeout: sc.delta_timeout,
        max_units: sc.units.max(1),
        // Long enough for a beacon and its offer to cross delayed links.
        discovery_window: 2 * sc.link_delay + 2,
        ..TradePolicy::default()
    };
    let seller_id = Deployment::identity_from_seed(crate::codec::sha256(&[b"seller", &seed.to_be_bytes()]));
    let buyer_id = Deployment::identity_from_seed(crate::codec::sha256(&[b"buyer", &seed.to_be_bytes()]));
    let mut seller = dep.enroll(seller_id, sc.seller_energy, policy.clone())?;
    let mut buyer = dep.enroll(buyer_id, sc.buyer_energy, policy)?;
    let ledger = &mut dep.ledger;

    let mut bus = Bus::new(seed).with_default_link(LinkParams {
        delay: sc.link_delay,
        drop_prob: sc.drop_prob,
    });
    bus.register(buyer.did());
    bus.register(seller.did());

    // Sellers offer nothing to a zero-unit beacon, so always ask for one.
    let candidates = discover(&mut buyer, &mut [&mut seller], sc.units.max(1), ledger, &mut bus)?;
    let chosen = select_seller(&candidates)?.clone();
    let channel = establish_channel(&mut buyer, &mut seller, &chosen, sc.units, ledger, &mut bus)?;
    let acct = |l: &Ledger, a| l.account(&a).expect("enrolled");
    let opening = Balances {
        seller: acct(ledger, seller.address()),
        buyer: acct(ledger, buyer.address()),
    };
    let report = run_trade(&mut buyer, &mut seller, channel, sc.units, ledger, &mut bus, sc.defection)?;

    let party = |r: &super::RobotCtx| oracle::Party {
        address: r.address(),
        key: *r.identity.keypair.public_key(),
    };
    let log = ChannelLog::new(
        &report.offchain_log,
        report.terms.exchange_id,
        party(&seller),
        party(&buyer),
        sc.unit_price,
    );
    let totals: Totals = log.latest();
    let stale = |role| {
        matches!(
            sc.defection,
            Some(Defection { role: r, adversary: Adversary::StaleClose { .. } }) if r == role
        )
    };
    let (es, eb) = oracle::settle(
        ledger.config(),
        opening.seller,
        opening.buyer,
        totals,
        stale(Role::Seller),
        stale(Role::Buyer),
    );
    let actual = Balances {
        seller: acct(ledger, seller.address()),
        buyer: acct(ledger, buyer.address()),
    };
    Ok(ScenarioResult {
        scenario: sc.clone(),
        report,
        opening,
        expected: Balances { seller: es, buyer: eb },
        actual,
        expected_totals: (totals.iteration, totals.energy, totals.credits),
        seller_battery: seller.battery,
        buyer_battery: buyer.battery,
        replay_ok: ledger.replay_matches(),
        ledger: dep.ledger,
    })
}
