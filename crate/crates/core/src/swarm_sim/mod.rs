//! Grid-world delivery swarm, with and without peer energy trading.
//!
//! Robots walk greedy Manhattan paths to goal points drawn from Gaussian
//! clusters and spend one unit per step. In enabled mode a robot at or
//! below the transfer trigger runs the full trade protocol against idle
//! robots nearby.

mod stats;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec;
use crate::trade::{
    discover, establish_channel, run_trade, select_seller, Bus, Deployment, RobotCtx, TradePolicy,
};

pub use stats::{
    bootstrap_mean_ci, compare, run, write_csv, Aggregate, Comparison, MetricSummary, PairedDiff,
    RunMetrics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Baseline,
    RoboCommEnabled,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::RoboCommEnabled => "robocomm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid simulation config: {0}")]
pub struct InvalidConfig(pub String);

/// Experiment parameters. The fields after `seed` tune the energy market
/// and default to conservative choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_robots: usize,
    pub grid_width: i32,
    pub grid_height: i32,
    pub initial_energy_min: u64,
    pub initial_energy_max: u64,
    pub delivery_goal: u32,
    pub energy_per_step: u64,
    /// A robot at or below this level looks for energy.
    pub transfer_trigger: u64,
    pub n_clusters: usize,
    pub points_per_cluster: usize,
    pub cluster_sigma: f64,
    pub steps: u32,
    pub runs: u32,
    pub mode: Mode,
    pub seed: u64,
    /// Chebyshev radius within which beacons are heard.
    pub discovery_radius: i32,
    /// Receivers buy up to this level.
    pub transfer_target: u64,
    /// Donors keep `transfer_trigger + donor_margin` units.
    pub donor_margin: u64,
    /// Energy an idle robot spends per step.
    pub idle_cost: u64,
    pub unit_price: u64,
    pub initial_credit: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_robots: 10,
            grid_width: 20,
            grid_height: 20,
            initial_energy_min: 10,
            initial_energy_max: 50,
            delivery_goal: 5,
            energy_per_step: 1,
            transfer_trigger: 2,
            n_clusters: 5,
            points_per_cluster: 50,
            cluster_sigma: 1.5,
            steps: 50,
            runs: 100,
            mode: Mode::Baseline,
            seed: 42,
            discovery_radius: 2,
            transfer_target: 15,
            donor_margin: 1,
            idle_cost: 0,
            unit_price: 2,
            initial_credit: 200,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let bad = |m: &str| Err(InvalidConfig(m.to_string()));
        if self.n_robots == 0 {
            return bad("n_robots must be positive");
        }
        if self.grid_width <= 0 || self.grid_height <= 0 {
            return bad("grid dimensions must be positive");
        }
        if self.initial_energy_min > self.initial_energy_max {
            return bad("initial_energy_min exceeds initial_energy_max");
        }
        if self.delivery_goal == 0 {
            return bad("delivery_goal must be positive");
        }
        if self.energy_per_step == 0 {
            return bad("energy_per_step must be positive");
        }
        if self.n_clusters == 0 || self.points_per_cluster == 0 {
            return bad("goal zones need at least one cluster and one point");
        }
        if !(self.cluster_sigma >= 0.0 && self.cluster_sigma.is_finite()) {
            return bad("cluster_sigma must be finite and non-negative");
        }
        if self.runs == 0 {
            return bad("runs must be positive");
        }
        if self.discovery_radius < 0 {
            return bad("discovery_radius must be non-negative");
        }
        if self.unit_price == 0 {
            return bad("unit_price must be positive");
        }
        Ok(())
    }

    /// Apply `key = value` lines (`#` comments) on top of `self`. Keys are
    /// the field names; `mode` takes `baseline` or `robocomm`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), InvalidConfig> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| InvalidConfig(format!("line {}: {m}", idx + 1));
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected key = value".into()))?;
            fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, String>
            where
                T::Err: std::fmt::Display,
            {
                v.parse().map_err(|e| format!("{k}: {e}"))
            }
            match k {
                "n_robots" => self.n_robots = num(k, v).map_err(err)?,
                "grid_width" => self.grid_width = num(k, v).map_err(err)?,
                "grid_height" => self.grid_height = num(k, v).map_err(err)?,
                "initial_energy_min" => self.initial_energy_min = num(k, v).map_err(err)?,
                "initial_energy_max" => self.initial_energy_max = num(k, v).map_err(err)?,
                "delivery_goal" => self.delivery_goal = num(k, v).map_err(err)?,
                "energy_per_step" => self.energy_per_step = num(k, v).map_err(err)?,
                "transfer_trigger" => self.transfer_trigger = num(k, v).map_err(err)?,
                "n_clusters" => self.n_clusters = num(k, v).map_err(err)?,
                "points_per_cluster" => self.points_per_cluster = num(k, v).map_err(err)?,
                "cluster_sigma" => self.cluster_sigma = num(k, v).map_err(err)?,
                "steps" => self.steps = num(k, v).map_err(err)?,
                "runs" => self.runs = num(k, v).map_err(err)?,
                "seed" => self.seed = num(k, v).map_err(err)?,
                "discovery_radius" => self.discovery_radius = num(k, v).map_err(err)?,
                "transfer_target" => self.transfer_target = num(k, v).map_err(err)?,
                "donor_margin" => self.donor_margin = num(k, v).map_err(err)?,
                "idle_cost" => self.idle_cost = num(k, v).map_err(err)?,
                "unit_price" => self.unit_price = num(k, v).map_err(err)?,
                "initial_credit" => self.initial_credit = num(k, v).map_err(err)?,
                "mode" => {
                    self.mode = match v {
                        "baseline" => Mode::Baseline,
                        "robocomm" => Mode::RoboCommEnabled,
                        other => return Err(err(format!("unknown mode {other:?}"))),
                    }
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        Ok(())
    }

    /// Seed of run `index`, shared by both modes for paired comparison.
    pub fn run_seed(&self, index: u32) -> u64 {
        let h = codec::sha256(&[b"robocomm/sim-run", &self.seed.to_be_bytes(), &index.to_be_bytes()]);
        u64::from_be_bytes(h[..8].try_into().expect("8 bytes"))
    }
}

pub type Cell = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RobotStatus {
    Active,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RobotAgent {
    pub position: Cell,
    pub energy: u64,
    pub deliveries_done: u32,
    pub carrying: bool,
    pub status: RobotStatus,
    pub goals: Vec<Cell>,
    /// Trading context; present in enabled mode only.
    pub ctx: Option<RobotCtx>,
}

impl RobotAgent {
    pub fn is_done(&self, goal: u32) -> bool {
        self.deliveries_done >= goal
    }

    pub fn current_goal(&self) -> Option<Cell> {
        self.goals.get(self.deliveries_done as usize).copied()
    }
}

/// One row per completed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepMetrics {
    pub step: u32,
    pub total_deliveries: u64,
    pub stalled: u64,
    pub swarm_energy: u64,
    pub mean_energy: f64,
}

/// Trades attempted and executed during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TradeStats {
    pub attempts: u64,
    pub completed: u64,
    pub units: u64,
    pub no_candidates: u64,
    pub failed: u64,
}

pub struct World {
    pub config: SimConfig,
    pub robots: Vec<RobotAgent>,
    pub cluster_centers: Vec<Cell>,
    pub goal_points: Vec<Cell>,
    pub step_index: u32,
    pub rows: Vec<StepMetrics>,
    pub trades: TradeStats,
    /// Energy spent on movement and idling so far.
    pub consumed: u64,
    pub initial_energy: u64,
    pub deployment: Option<Deployment>,
    rng: ChaCha8Rng,
    bus_rng: ChaCha8Rng,
}

fn clip(v: f64, max: i32) -> i32 {
    (v.round() as i64).clamp(0, (max - 1) as i64) as i32
}

/// Lay out the grid, goal zones and robots. In enabled mode every robot is
/// enrolled on a fresh ledger before the first step.
pub fn init_world(config: &SimConfig, run_seed: u64) -> Result<World, InvalidConfig> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let (w, h) = (config.grid_width, config.grid_height);

    let cluster_centers: Vec<Cell> = (0..config.n_clusters)
        .map(|_| (rng.gen_range(0..w), rng.gen_range(0..h)))
        .collect();
    let normal = Normal::new(0.0, config.cluster_sigma).expect("sigma validated");
    let mut by_cluster: Vec<Vec<Cell>> = Vec::with_capacity(config.n_clusters);
    for &(cx, cy) in &cluster_centers {
        let pts = (0..config.points_per_cluster)
            .map(|_| {
                let dx = normal.sample(&mut rng);
                let dy = normal.sample(&mut rng);
                (clip(cx as f64 + dx, w), clip(cy as f64 + dy, h))
            })
            .collect();
        by_cluster.push(pts);
    }
    let goal_points: Vec<Cell> = by_cluster.iter().flatten().copied().collect();

    let mut robots = Vec::with_capacity(config.n_robots);
    for _ in 0..config.n_robots {
        let position = (rng.gen_range(0..w), rng.gen_range(0..h));
        let energy = rng.gen_range(config.initial_energy_min..=config.initial_energy_max);
        let zone = &by_cluster[rng.gen_range(0..config.n_clusters)];
        let goals = (0..config.delivery_goal)
            .map(|_| zone[rng.gen_range(0..zone.len())])
            .collect();
        robots.push(RobotAgent {
            position,
            energy,
            deliveries_done: 0,
            carrying: true,
            status: RobotStatus::Active,
            goals,
            ctx: None,
        });
    }

    // Keys and bus randomness come from their own streams so enabling the
    // protocol never perturbs the world stream shared with the baseline.
    let side = |tag: &[u8]| codec::sha256(&[b"robocomm/sim", tag, &run_seed.to_be_bytes()]);
    let deployment = match config.mode {
        Mode::Baseline => None,
        Mode::RoboCommEnabled => {
            let mut dep = Deployment::new(&format!("sim/{run_seed}"), |c| c.initial_credit = config.initial_credit);
            let policy = TradePolicy {
                unit_price: config.unit_price,
                retain_floor: config.transfer_trigger + config.donor_margin,
                ..TradePolicy::default()
            };
            for (i, r) in robots.iter_mut().enumerate() {
                let seed = codec::sha256(&[&side(b"keys"), &(i as u64).to_be_bytes()]);
                let identity = Deployment::identity_from_seed(seed);
                let ctx = dep
                    .enroll(identity, r.energy, policy.clone())
                    .map_err(|e| InvalidConfig(format!("enrolment failed: {e}")))?;
                r.ctx = Some(ctx);
            }
            Some(dep)
        }
    };

    let initial_energy = robots.iter().map(|r| r.energy).sum();
    Ok(World {
        config: config.clone(),
        robots,
        cluster_centers,
        goal_points,
        step_index: 0,
        rows: Vec::new(),
        trades: TradeStats::default(),
        consumed: 0,
        initial_energy,
        deployment,
        rng,
        bus_rng: ChaCha8Rng::from_seed(side(b"bus")),
    })
}

fn chebyshev(a: Cell, b: Cell) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// Greedy Manhattan step, x axis first.
pub fn step_toward(from: Cell, to: Cell) -> Cell {
    if from.0 != to.0 {
        (from.0 + (to.0 - from.0).signum(), from.1)
    } else {
        (from.0, from.1 + (to.1 - from.1).signum())
    }
}

impl World {
    pub fn swarm_energy(&self) -> u64 {
        self.robots.iter().map(|r| r.energy).sum()
    }

    pub fn total_deliveries(&self) -> u64 {
        self.robots.iter().map(|r| r.deliveries_done as u64).sum()
    }

    /// Movement never creates energy and trades only move it.
    pub fn energy_conserved(&self) -> bool {
        self.swarm_energy() + self.consumed == self.initial_energy
    }

    pub fn is_finished(&self) -> bool {
        self.step_index >= self.config.steps
    }

    /// Advance one step and append its metrics row.
    pub fn step(&mut self) {
        assert!(!self.is_finished(), "world already ran all steps");
        let mut order: Vec<usize> = (0..self.robots.len()).collect();
        order.shuffle(&mut self.rng);
        let goal = self.config.delivery_goal;

        for i in order {
            if self.robots[i].is_done(goal) {
                let spend = self.config.idle_cost.min(self.robots[i].energy);
                self.robots[i].energy -= spend;
                self.consumed += spend;
                continue;
            }
            if self.config.mode == Mode::RoboCommEnabled && self.robots[i].energy <= self.config.transfer_trigger {
                self.try_trade(i);
            }
            let cost = self.config.energy_per_step;
            let r = &mut self.robots[i];
            if r.energy < cost {
                r.status = RobotStatus::Stalled;
                continue;
            }
            r.status = RobotStatus::Active;
            r.energy -= cost;
            self.consumed += cost;
            let target = r.current_goal().expect("not done implies a goal");
            r.position = step_toward(r.position, target);
            if r.position == target {
                r.deliveries_done += 1;
                r.carrying = !r.is_done(goal);
            }
        }
        for r in &mut self.robots {
            if !r.is_done(goal) && r.energy < self.config.energy_per_step {
                r.status = RobotStatus::Stalled;
            }
        }
        debug_assert!(self.energy_conserved());
        if let Some(dep) = &mut self.deployment {
            dep.ledger.advance_block(1).expect("positive advance");
        }
        self.step_index += 1;
        let swarm_energy = self.swarm_energy();
        self.rows.push(StepMetrics {
            step: self.step_index,
            total_deliveries: self.total_deliveries(),
            stalled: self
                .robots
                .iter()
                .filter(|r| r.status == RobotStatus::Stalled)
                .count() as u64,
            swarm_energy,
            mean_energy: swarm_energy as f64 / self.robots.len() as f64,
        });
    }

    /// Buy energy for robot `i` from idle robots within the discovery
    /// radius, using the full protocol.
    fn try_trade(&mut self, i: usize) {
        let cfg = &self.config;
        let want = cfg.transfer_target.saturating_sub(self.robots[i].energy);
        if want == 0 {
            return;
        }
        self.trades.attempts += 1;
        let here = self.robots[i].position;
        let neighbours: Vec<usize> = (0..self.robots.len())
            .filter(|&j| j != i && chebyshev(here, self.robots[j].position) <= cfg.discovery_radius)
            .collect();
        let goal = cfg.delivery_goal;
        let dep = self.deployment.as_mut().expect("enabled mode has a ledger");

        let mut buyer = self.robots[i].ctx.take().expect("enabled robot has a context");
        buyer.battery = self.robots[i].energy;
        buyer.available = false;
        let mut peers: BTreeMap<usize, RobotCtx> = BTreeMap::new();
        for &j in &neighbours {
            let mut c = self.robots[j].ctx.take().expect("enabled robot has a context");
            c.battery = self.robots[j].energy;
            c.available = self.robots[j].is_done(goal);
            peers.insert(j, c);
        }

        let mut bus = Bus::new(self.bus_rng.gen());
        bus.register(buyer.did());
        for c in peers.values() {
            bus.register(c.did());
        }
        let ledger = &mut dep.ledger;
        let outcome = (|| {
            let mut refs: Vec<&mut RobotCtx> = peers.values_mut().collect();
            let cands = discover(&mut buyer, &mut refs, want, ledger, &mut bus)?;
            drop(refs);
            let chosen = select_seller(&cands)?.clone();
            let credit = ledger.account(&buyer.address()).map_or(0, |a| a.credit_score);
            let affordable = (credit - ledger.config().credit_floor).max(0) as u64 / buyer.policy.unit_price;
            let units = want.min(chosen.offered_units).min(affordable);
            let (&j, seller) = peers
                .iter_mut()
                .find(|(_, c)| c.did() == chosen.did)
                .expect("candidates come from peers");
            let before = ledger.account(&seller.address()).expect("enrolled").energy_level;
            let ch = establish_channel(&mut buyer, seller, &chosen, units, ledger, &mut bus)?;
            let report = run_trade(&mut buyer, seller, ch, units, ledger, &mut bus, None)?;
            let after = ledger.account(&seller.address()).expect("enrolled").energy_level;
            // Settled ledger energy moves exactly as the batteries did.
            debug_assert_eq!(before - after, report.seller.energy_moved);
            Ok::<_, crate::trade::TradeError>((j, report.settlement.energy_units))
        })();

        match outcome {
            Ok((_, units)) => {
                self.trades.completed += 1;
                self.trades.units += units;
            }
            Err(crate::trade::TradeError::EmptyCandidates) => self.trades.no_candidates += 1,
            Err(_) => self.trades.failed += 1,
        }
        self.robots[i].energy = buyer.battery;
        self.robots[i].ctx = Some(buyer);
        for (j, c) in peers {
            self.robots[j].energy = c.battery;
            self.robots[j].ctx = Some(c);
        }
    }

    /// Run the remaining steps.
    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step();
        }
    }
}
