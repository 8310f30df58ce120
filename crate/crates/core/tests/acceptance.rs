//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robocomm::bench::run_bench;
use robocomm::channel::{
    build_offchain_tx, sign_offchain_tx, ChannelId, ExchangeId, OffChainTxPair, Role, SignedOffChainTx, ValueKind,
};
use robocomm::codec::Encode;
use robocomm::credentials::{present, verify_presentation, Challenge, Claim};
use robocomm::identity::create_did;
use robocomm::ledger::{ChannelTerms, Ledger, LedgerError, OnChainTx};
use robocomm::swarm_sim::{compare, SimConfig};
use robocomm::trade::oracle::{self, ChannelLog, Party};
use robocomm::trade::{
    record_outcome, run_scenario, Adversary, Closure, Defection, Deployment, RobotCtx, Scenario, ScenarioResult,
    TradePolicy,
};

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn replay_hash_ok(l: &Ledger) -> bool {
    Ledger::replay(*l.config(), l.tx_log()).is_ok_and(|r| r.state_hash() == l.state_hash()) && l.replay_matches()
}

/// Every single-party defection on a 5-unit, price-2 trade.
fn defections() -> Vec<Defection> {
    let mut out = Vec::new();
    for role in [Role::Seller, Role::Buyer] {
        for point in 0..=10 {
            for adversary in [
                Adversary::Withhold { point },
                Adversary::Offline { point },
                Adversary::ForgeAttempt { point },
                Adversary::ReplayStale { point },
            ] {
                out.push(Defection { role, adversary });
            }
        }
        for iteration in 0..5 {
            out.push(Defection {
                role,
                adversary: Adversary::StaleClose { iteration },
            });
        }
    }
    out
}

fn c1_bounded_loss(replays: &mut Vec<bool>) -> Verdict {
    let cases = defections();
    let mut failures = Vec::new();
    for (k, d) in cases.iter().enumerate() {
        let sc = Scenario {
            name: format!("c1-{k}"),
            units: 5,
            unit_price: 2,
            defection: Some(*d),
            ..Scenario::default()
        };
        let res = match run_scenario(&sc, k as u64) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{d:?}: {e}"));
                continue;
            }
        };
        replays.push(replay_hash_ok(&res.ledger));
        let r = &res.report;
        let (honest, cheater, cheater_addr) = match d.role {
            Role::Seller => (&r.buyer, &r.seller, r.terms.seller),
            Role::Buyer => (&r.seller, &r.buyer, r.terms.buyer),
        };
        let loss_ok = match d.role {
            Role::Seller => honest.overpaid_credits <= 2,
            Role::Buyer => honest.unpaid_energy <= 1,
        };
        let blacklisted = record_outcome(TradePolicy::default(), honest)
            .blacklist
            .contains(&create_did(cheater_addr));
        let onchain = res
            .ledger
            .channel(&r.terms.channel_id)
            .is_some_and(|c| c.cheaters.contains(&cheater_addr));
        let flagged = match d.adversary {
            // A proven stale claim must cost the penalty on chain.
            Adversary::StaleClose { .. } => onchain && cheater.closure == Closure::DisputedLost,
            _ => blacklisted || onchain,
        };
        if !(loss_ok && flagged && res.balances_match()) {
            failures.push(format!(
                "{d:?}: loss_ok={loss_ok} flagged={flagged} balances={} honest={:?}",
                res.balances_match(),
                honest.closure
            ));
        }
    }
    let detail = format!("{} defections, {} failing", cases.len(), failures.len());
    for f in &failures {
        eprintln!("  c1: {f}");
    }
    verdict(failures.is_empty(), detail)
}

struct Fixture {
    dep: Deployment,
    seller: RobotCtx,
    buyer: RobotCtx,
    terms: ChannelTerms,
    log: Vec<SignedOffChainTx>,
}

fn fixture(tag: &str, iterations: u64) -> Fixture {
    let mut dep = Deployment::new(tag, |c| {
        c.initial_credit = 100;
        c.challenge_period = 10;
    });
    let seller = dep.enroll_label(&format!("{tag}/s"), 40).unwrap();
    let buyer = dep.enroll_label(&format!("{tag}/b"), 2).unwrap();
    let exchange_id = ExchangeId::derive(&[tag.as_bytes()]);
    let terms = ChannelTerms {
        channel_id: ChannelId::derive(&[b"c2", &exchange_id.0]),
        exchange_id,
        seller: seller.address(),
        buyer: buyer.address(),
        unit_price: 2,
    };
    for who in [&seller, &buyer] {
        let r = dep
            .ledger
            .submit_tx(OnChainTx::ConfirmChannel { terms }.sign(&who.identity.keypair));
        assert!(r.is_ok(), "{:?}", r.result);
    }
    let mut log = Vec::new();
    for i in 1..=iterations {
        let e = build_offchain_tx(exchange_id, i, terms.seller, terms.buyer, i, ValueKind::EnergyUnits).unwrap();
        let c = build_offchain_tx(exchange_id, i, terms.buyer, terms.seller, 2 * i, ValueKind::CreditScore).unwrap();
        log.push(sign_offchain_tx(&seller.identity.keypair, e).unwrap());
        log.push(sign_offchain_tx(&buyer.identity.keypair, c).unwrap());
    }
    Fixture {
        dep,
        seller,
        buyer,
        terms,
        log,
    }
}

impl Fixture {
    fn pair(&self, i: u64) -> OffChainTxPair {
        let k = 2 * (i as usize - 1);
        OffChainTxPair {
            energy_tx: self.log[k],
            credit_tx: self.log[k + 1],
        }
    }
}

fn c2_disputes() -> Verdict {
    let mut cases = 0;
    let mut failures = Vec::new();
    for stale in 1..=5u64 {
        for honest in stale + 1..=6 {
            for in_time in [true, false] {
                cases += 1;
                let mut f = fixture(&format!("c2/{stale}/{honest}/{in_time}"), 6);
                // Alternate which side lies so both roles are covered.
                let (liar, victim) = if (stale + honest) % 2 == 0 {
                    (&f.buyer, &f.seller)
                } else {
                    (&f.seller, &f.buyer)
                };
                let (liar_kp, victim_kp) = (liar.identity.keypair.clone(), victim.identity.keypair.clone());
                let liar_addr = liar.address();
                let id = f.terms.channel_id;
                let opening = |l: &Ledger, a| l.account(&a).unwrap();
                let (os, ob) = (opening(&f.dep.ledger, f.terms.seller), opening(&f.dep.ledger, f.terms.buyer));

                let (sp, hp) = (f.pair(stale), f.pair(honest));
                let l = &mut f.dep.ledger;
                let r = l.submit_tx(OnChainTx::UnilateralClose { channel_id: id, pair: Some(sp) }.sign(&liar_kp));
                assert!(r.is_ok(), "{:?}", r.result);
                let wait = if in_time { 9 } else { 10 };
                l.advance_block(wait).unwrap();
                let ch = l.submit_tx(OnChainTx::Challenge { channel_id: id, pair: hp }.sign(&victim_kp));
                if !in_time {
                    if ch.result != Err(LedgerError::ChallengeExpired) {
                        failures.push(format!("{stale}/{honest} late challenge gave {:?}", ch.result));
                    }
                } else if !ch.is_ok() {
                    failures.push(format!("{stale}/{honest} timely challenge gave {:?}", ch.result));
                }
                if in_time {
                    // The deadline is not extended by the challenge.
                    l.advance_block(1).unwrap();
                }
                let fin = l.submit_tx(OnChainTx::FinalizeClose { channel_id: id }.sign(&victim_kp));
                if !fin.is_ok() {
                    failures.push(format!("{stale}/{honest}/{in_time} finalize gave {:?}", fin.result));
                    continue;
                }

                let party = |c: &RobotCtx| Party {
                    address: c.address(),
                    key: *c.identity.keypair.public_key(),
                };
                let log = ChannelLog::new(&f.log, f.terms.exchange_id, party(&f.seller), party(&f.buyer), 2);
                let settled_at = if in_time { honest } else { stale };
                let liar_flagged = in_time;
                let (es, eb) = oracle::settle(
                    l.config(),
                    os,
                    ob,
                    log.totals_upto(settled_at),
                    liar_flagged && liar_addr == f.terms.seller,
                    liar_flagged && liar_addr == f.terms.buyer,
                );
                let (as_, ab) = (l.account(&f.terms.seller).unwrap(), l.account(&f.terms.buyer).unwrap());
                if (es, eb) != (as_, ab) || !replay_hash_ok(l) {
                    failures.push(format!(
                        "{stale}/{honest}/{in_time}: expected {es:?} {eb:?}, got {as_:?} {ab:?}"
                    ));
                }
            }
        }
    }
    for f in &failures {
        eprintln!("  c2: {f}");
    }
    verdict(
        failures.is_empty() && cases == 30,
        format!("{cases} cases, {} failing", failures.len()),
    )
}

fn c3_replay(mut replays: Vec<bool>, extra: &[ScenarioResult]) -> Verdict {
    replays.extend(extra.iter().map(|r| replay_hash_ok(&r.ledger)));
    let bad = replays.iter().filter(|ok| !**ok).count();
    verdict(bad == 0, format!("{} ledgers replayed, {bad} mismatched", replays.len()))
}

fn windows_absent(hay: &[u8], needle: &[u8], w: usize) -> bool {
    needle.windows(w).all(|n| !hay.windows(w).any(|h| h == n))
}

fn c4_selective_disclosure() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dep = Deployment::new("c4", |_| {});
    let holder = dep.enroll_label("c4/holder", 10).unwrap();
    let kp = holder.identity.keypair.clone();
    let mut problems = Vec::new();
    let mut mutations = 0usize;
    for trial in 0..100 {
        let values: Vec<String> = (0..3)
            .map(|_| {
                let mut b = [0u8; 32];
                rng.fill_bytes(&mut b);
                hex::encode(b)
            })
            .collect();
        let claims = vec![
            Claim::new("end_of_life_date", values[0].clone()),
            Claim::new("manufacturer", values[1].clone()),
            Claim::new("hardware_spec", values[2].clone()),
        ];
        let vc = dep.issuer.issue(&holder.did(), claims, 0).unwrap();
        let challenge = Challenge::random(&mut rng);
        let p = present(&vc, &kp, &["end_of_life_date"], challenge).unwrap();
        if !verify_presentation(&p, &dep.ledger, &dep.ledger, &challenge).is_accepted() {
            problems.push(format!("trial {trial}: honest presentation rejected"));
        }
        let bytes = p.canonical_bytes();
        for (k, v) in values.iter().enumerate().skip(1) {
            let digest = vc.proofs[k].claim_digest;
            if !windows_absent(&bytes, v.as_bytes(), 8) || !windows_absent(&bytes, &digest, 8) {
                problems.push(format!("trial {trial}: undisclosed claim {k} leaks"));
            }
        }
        // Flip every bit of the disclosed proof (digest then signature).
        for bit in 0..(32 + 64) * 8 {
            let mut m = p.clone();
            let proof = &mut m.disclosed[0].proof;
            let (byte, mask) = (bit / 8, 1u8 << (bit % 8));
            if byte < 32 {
                proof.claim_digest[byte] ^= mask;
            } else {
                proof.signature.0[byte - 32] ^= mask;
            }
            mutations += 1;
            if verify_presentation(&m, &dep.ledger, &dep.ledger, &challenge).is_accepted() {
                problems.push(format!("trial {trial}: mutated bit {bit} accepted"));
            }
        }
    }
    for p in problems.iter().take(10) {
        eprintln!("  c4: {p}");
    }
    verdict(
        problems.is_empty(),
        format!("100 trials, {mutations} proof mutations, {} problems", problems.len()),
    )
}

fn c5_swarm() -> Verdict {
    let cfg = SimConfig::default();
    let cmp = match compare(&cfg) {
        Ok(c) => c,
        Err(e) => return verdict(false, e.to_string()),
    };
    let (d, s) = (&cmp.deliveries, &cmp.stalled);
    verdict(
        cmp.directional_holds() && cmp.energy_conserved,
        format!(
            "{} paired runs: deliveries {:.2} -> {:.2} (diff ci95 [{:.2}, {:.2}]), stalled {:.2} -> {:.2} (diff ci95 [{:.2}, {:.2}])",
            cfg.runs, d.baseline_mean, d.enabled_mean, d.ci_low, d.ci_high, s.baseline_mean, s.enabled_mean, s.ci_low, s.ci_high
        ),
    )
}

fn c6_c7_bench() -> (Verdict, Verdict) {
    let r = run_bench(1000, 42);
    let timing = r
        .timings
        .iter()
        .map(|t| format!("{} {:.3}±{:.3} ms", t.name, t.mean_ms, t.stddev_ms))
        .collect::<Vec<_>>()
        .join(", ");
    let c6 = verdict(
        r.timings.len() == 3 && r.timings.iter().all(|t| t.iterations == 1000 && t.mean_ms < 50.0),
        timing,
    );
    let c7 = verdict(
        (200..=1200).contains(&r.did_document_bytes) && (150..=900).contains(&r.signed_offchain_tx_bytes),
        format!(
            "DidDocument {} bytes (ref 563), SignedOffChainTx {} bytes (ref 480)",
            r.did_document_bytes, r.signed_offchain_tx_bytes
        ),
    );
    (c6, c7)
}

fn c8_conservation(replays: &mut Vec<bool>) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    for k in 0..1000u64 {
        let units = rng.gen_range(0..=50);
        let price = rng.gen_range(1..=5);
        let sc = Scenario {
            name: format!("c8-{k}"),
            units,
            unit_price: price,
            initial_credit: 300,
            seller_energy: 60,
            ..Scenario::default()
        };
        let res = match run_scenario(&sc, k) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{units}@{price}: {e}"));
                continue;
            }
        };
        replays.push(replay_hash_ok(&res.ledger));
        let bonus = res.ledger.config().honesty_bonus;
        let (o, a) = (&res.opening, &res.actual);
        let credit_ok = a.seller.credit_score + a.buyer.credit_score
            == o.seller.credit_score + o.buyer.credit_score + 2 * bonus;
        let energy_ok = a.seller.energy_level + a.buyer.energy_level == o.seller.energy_level + o.buyer.energy_level;
        let physical_ok = res.seller_battery + res.buyer_battery == sc.seller_energy + sc.buyer_energy;
        let full = res.expected_totals == (units, units, units * price);
        if !(credit_ok && energy_ok && physical_ok && full && res.balances_match()) {
            failures.push(format!(
                "{units}@{price}: credit={credit_ok} energy={energy_ok} physical={physical_ok} full={full} oracle={}",
                res.balances_match()
            ));
        }
    }
    for f in failures.iter().take(10) {
        eprintln!("  c8: {f}");
    }
    verdict(failures.is_empty(), format!("1000 trades, {} failing", failures.len()))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let mut replays = Vec::new();
    let mut lines: Vec<(u8, &str, Verdict, Duration, Option<Duration>)> = Vec::new();

    let (v, t) = timed(|| c1_bounded_loss(&mut replays));
    lines.push((1, "protocol safety, bounded loss", v, t, Some(Duration::from_secs(10))));
    let (v, t) = timed(c2_disputes);
    lines.push((2, "dispute correctness", v, t, Some(Duration::from_secs(5))));
    let demos: Vec<ScenarioResult> = Scenario::BUILTIN
        .iter()
        .flat_map(|n| (1..=6).map(move |u| run_scenario(&Scenario::builtin(n, u).unwrap(), u).unwrap()))
        .collect();
    let (v, t) = timed(|| c8_conservation(&mut replays));
    let c8 = (8, "conservation over random honest trades", v, t, None);
    let (v, t) = timed(|| c3_replay(replays, &demos));
    lines.push((3, "ledger replay determinism", v, t, None));
    let (v, t) = timed(c4_selective_disclosure);
    lines.push((4, "selective disclosure", v, t, None));
    let (v, t) = timed(c5_swarm);
    lines.push((5, "swarm directional result", v, t, Some(Duration::from_secs(120))));
    let ((v6, v7), t) = timed(c6_c7_bench);
    lines.push((6, "benchmark order of magnitude", v6, t, None));
    lines.push((7, "payload size brackets", v7, Duration::ZERO, None));
    lines.push(c8);

    let mut all = true;
    for (n, name, v, took, budget) in lines {
        let in_budget = budget.map_or(true, |b| took <= b);
        let ok = v.ok && in_budget;
        all &= ok;
        let budget = budget.map_or(String::new(), |b| format!(" budget {}s", b.as_secs()));
        println!(
            "{} criterion {n}: {name}: {} [{:.2}s{budget}]",
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
