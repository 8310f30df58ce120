use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::identity::Did;

/// Delivery delay in blocks and independent per-message drop probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkParams {
    pub delay: u64,
    pub drop_prob: f64,
}

impl LinkParams {
    pub const LOSSLESS: LinkParams = LinkParams {
        delay: 0,
        drop_prob: 0.0,
    };
}

impl Default for LinkParams {
    fn default() -> Self {
        Self::LOSSLESS
    }
}

/// `to == None` is a broadcast to every other registered endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub from: Did,
    pub to: Option<Did>,
    pub kind: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BusStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub sent_by_kind: BTreeMap<u8, u64>,
}

#[derive(Debug, Clone)]
struct InFlight {
    deliver_at: u64,
    seq: u64,
    to: Did,
    env: Envelope,
}

/// In-process message transport with per-link delay and loss.
#[derive(Debug, Clone)]
pub struct Bus {
    endpoints: BTreeSet<Did>,
    default_link: LinkParams,
    links: BTreeMap<(Did, Did), LinkParams>,
    rng: ChaCha8Rng,
    queue: Vec<InFlight>,
    seq: u64,
    stats: BusStats,
}

impl Bus {
    pub fn new(seed: u64) -> Self {
        Bus {
            endpoints: BTreeSet::new(),
            default_link: LinkParams::LOSSLESS,
            links: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: Vec::new(),
            seq: 0,
            stats: BusStats::default(),
        }
    }

    pub fn with_default_link(mut self, link: LinkParams) -> Self {
        self.default_link = link;
        self
    }

    pub fn register(&mut self, did: Did) {
        self.endpoints.insert(did);
    }

    pub fn is_registered(&self, did: &Did) -> bool {
        self.endpoints.contains(did)
    }

    /// Directed link override.
    pub fn set_link(&mut self, from: Did, to: Did, link: LinkParams) {
        self.links.insert((from, to), link);
    }

    fn link(&self, from: &Did, to: &Did) -> LinkParams {
        self.links.get(&(*from, *to)).copied().unwrap_or(self.default_link)
    }

    /// Queue `env` at time `now`. Returns how many copies were enqueued.
    pub fn send(&mut self, env: Envelope, now: u64) -> usize {
        self.stats.sent += 1;
        *self.stats.sent_by_kind.entry(env.kind).or_default() += 1;
        let targets: Vec<Did> = match env.to {
            Some(to) => vec![to].into_iter().filter(|d| self.endpoints.contains(d)).collect(),
            None => self.endpoints.iter().filter(|d| **d != env.from).copied().collect(),
        };
        let mut queued = 0;
        for to in targets {
            let link = self.link(&env.from, &to);
            // Only lossy links consume randomness, so lossless runs stay
            // independent of the bus seed.
            if link.drop_prob > 0.0 && self.rng.gen_bool(link.drop_prob.min(1.0)) {
                self.stats.dropped += 1;
                continue;
            }
            self.seq += 1;
            self.queue.push(InFlight {
                deliver_at: now + link.delay,
                seq: self.seq,
                to,
                env: env.clone(),
            });
            queued += 1;
        }
        queued
    }

    /// Everything addressed to `me` that has arrived by `now`, oldest first.
    pub fn recv(&mut self, me: &Did, now: u64) -> Vec<Envelope> {
        let mut ready: Vec<InFlight> = Vec::new();
        let mut i = 0;
        while i < self.queue.len() {
            if self.queue[i].to == *me && self.queue[i].deliver_at <= now {
                ready.push(self.queue.remove(i));
            } else {
                i += 1;
            }
        }
        ready.sort_by_key(|m| (m.deliver_at, m.seq));
        self.stats.delivered += ready.len() as u64;
        ready.into_iter().map(|m| m.env).collect()
    }

    pub fn has_ready(&self, me: &Did, now: u64) -> bool {
        self.queue.iter().any(|m| m.to == *me && m.deliver_at <= now)
    }

    /// Earliest future delivery time, if anything is in flight.
    pub fn next_delivery(&self) -> Option<u64> {
        self.queue.iter().map(|m| m.deliver_at).min()
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    /// Discard everything queued for `me`.
    pub fn purge(&mut self, me: &Did) {
        self.queue.retain(|m| m.to != *me);
    }

    pub fn stats(&self) -> &BusStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::Identity;

    fn env(from: &Identity, to: Option<&Identity>) -> Envelope {
        Envelope {
            from: from.did,
            to: to.map(|i| i.did),
            kind: 1,
            payload: vec![7],
        }
    }

    #[test]
    fn broadcast_reaches_everyone_but_sender() {
        let (a, b, c) = (
            Identity::from_label("a"),
            Identity::from_label("b"),
            Identity::from_label("c"),
        );
        let mut bus = Bus::new(0);
        for i in [&a, &b, &c] {
            bus.register(i.did);
        }
        assert_eq!(bus.send(env(&a, None), 0), 2);
        assert!(bus.recv(&a.did, 0).is_empty());
        assert_eq!(bus.recv(&b.did, 0).len(), 1);
        assert_eq!(bus.recv(&c.did, 0).len(), 1);
    }

    #[test]
    fn delay_holds_messages_until_due() {
        let (a, b) = (Identity::from_label("a"), Identity::from_label("b"));
        let mut bus = Bus::new(0).with_default_link(LinkParams {
            delay: 3,
            drop_prob: 0.0,
        });
        bus.register(a.did);
        bus.register(b.did);
        bus.send(env(&a, Some(&b)), 10);
        assert!(bus.recv(&b.did, 12).is_empty());
        assert_eq!(bus.next_delivery(), Some(13));
        assert_eq!(bus.recv(&b.did, 13).len(), 1);
    }

    #[test]
    fn full_loss_drops_everything_and_is_seed_deterministic() {
        let (a, b) = (Identity::from_label("a"), Identity::from_label("b"));
        let mut bus = Bus::new(0);
        bus.register(a.did);
        bus.register(b.did);
        bus.set_link(a.did, b.did, LinkParams { delay: 0, drop_prob: 1.0 });
        assert_eq!(bus.send(env(&a, Some(&b)), 0), 0);
        assert_eq!(bus.stats().dropped, 1);

        let run = |seed| {
            let mut bus = Bus::new(seed).with_default_link(LinkParams {
                delay: 0,
                drop_prob: 0.5,
            });
            bus.register(a.did);
            bus.register(b.did);
            (0..64).map(|_| bus.send(env(&a, Some(&b)), 0)).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn unregistered_recipient_gets_nothing() {
        let (a, b) = (Identity::from_label("a"), Identity::from_label("b"));
        let mut bus = Bus::new(0);
        bus.register(a.did);
        assert_eq!(bus.send(env(&a, Some(&b)), 0), 0);
    }
}
