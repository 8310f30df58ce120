use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{init_world, InvalidConfig, Mode, SimConfig, StepMetrics, TradeStats};

#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub run: u32,
    pub mode: Mode,
    pub seed: u64,
    pub rows: Vec<StepMetrics>,
    pub trades: TradeStats,
    pub energy_conserved: bool,
}

impl RunMetrics {
    pub fn final_deliveries(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.total_deliveries)
    }

    pub fn final_stalled(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.stalled)
    }
}

fn run_one(config: &SimConfig, mode: Mode, index: u32) -> Result<RunMetrics, InvalidConfig> {
    let cfg = SimConfig {
        mode,
        ..config.clone()
    };
    let seed = cfg.run_seed(index);
    let mut world = init_world(&cfg, seed)?;
    let mut conserved = world.energy_conserved();
    while !world.is_finished() {
        world.step();
        conserved &= world.energy_conserved();
    }
    Ok(RunMetrics {
        run: index,
        mode,
        seed,
        rows: world.rows,
        trades: world.trades,
        energy_conserved: conserved,
    })
}

/// All runs of `config.mode`, in parallel, ordered by run index.
pub fn run(config: &SimConfig) -> Result<Vec<RunMetrics>, InvalidConfig> {
    config.validate()?;
    (0..config.runs)
        .into_par_iter()
        .map(|i| run_one(config, config.mode, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    fn of(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let n = xs.clone().count();
        if n == 0 {
            return MetricSummary { mean: 0.0, std: 0.0 };
        }
        let mean = xs.clone().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        MetricSummary { mean, std: var.sqrt() }
    }
}

/// Across-run statistics at one step.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub step: u32,
    pub total_deliveries: MetricSummary,
    pub stalled: MetricSummary,
    pub swarm_energy: MetricSummary,
    pub mean_energy: MetricSummary,
}

fn aggregate(runs: &[RunMetrics]) -> Vec<Aggregate> {
    let steps = runs.first().map_or(0, |r| r.rows.len());
    (0..steps)
        .map(|s| {
            let col = |f: fn(&StepMetrics) -> f64| MetricSummary::of(runs.iter().map(move |r| f(&r.rows[s])));
            Aggregate {
                step: runs[0].rows[s].step,
                total_deliveries: col(|m| m.total_deliveries as f64),
                stalled: col(|m| m.stalled as f64),
                swarm_energy: col(|m| m.swarm_energy as f64),
                mean_energy: col(|m| m.mean_energy),
            }
        })
        .collect()
}

/// Percentile bootstrap interval for the mean of `samples`.
pub fn bootstrap_mean_ci(samples: &[f64], resamples: usize, confidence: f64, seed: u64) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| samples[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - confidence) / 2.0;
    let at = |q: f64| means[((q * (means.len() - 1) as f64).round() as usize).min(means.len() - 1)];
    (at(alpha), at(1.0 - alpha))
}

/// Enabled minus baseline, over paired runs.
#[derive(Debug, Clone, Serialize)]
pub struct PairedDiff {
    pub baseline_mean: f64,
    pub enabled_mean: f64,
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl PairedDiff {
    fn new(base: &[f64], enabled: &[f64], seed: u64) -> Self {
        let diffs: Vec<f64> = enabled.iter().zip(base).map(|(e, b)| e - b).collect();
        let (ci_low, ci_high) = bootstrap_mean_ci(&diffs, BOOTSTRAP_RESAMPLES, 0.95, seed);
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        PairedDiff {
            baseline_mean: mean(base),
            enabled_mean: mean(enabled),
            mean_diff: mean(&diffs),
            ci_low,
            ci_high,
        }
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub config: SimConfig,
    pub baseline: Vec<Aggregate>,
    pub enabled: Vec<Aggregate>,
    /// Final-step deliveries.
    pub deliveries: PairedDiff,
    /// Final-step stalled robots.
    pub stalled: PairedDiff,
    pub trades_completed: u64,
    pub units_traded: u64,
    pub energy_conserved: bool,
    #[serde(skip)]
    pub baseline_runs: Vec<RunMetrics>,
    #[serde(skip)]
    pub enabled_runs: Vec<RunMetrics>,
}

impl Comparison {
    /// Trading delivers at least as much and stalls no more, with the 95%
    /// interval of each paired difference on the right side of zero.
    pub fn directional_holds(&self) -> bool {
        self.deliveries.ci_low >= 0.0 && self.stalled.ci_high <= 0.0
    }
}

/// Both modes on the same run seeds.
pub fn compare(config: &SimConfig) -> Result<Comparison, InvalidConfig> {
    config.validate()?;
    let pair: Vec<(RunMetrics, RunMetrics)> = (0..config.runs)
        .into_par_iter()
        .map(|i| {
            Ok((
                run_one(config, Mode::Baseline, i)?,
                run_one(config, Mode::RoboCommEnabled, i)?,
            ))
        })
        .collect::<Result<_, InvalidConfig>>()?;
    let (baseline_runs, enabled_runs): (Vec<_>, Vec<_>) = pair.into_iter().unzip();
    let col = |rs: &[RunMetrics], f: fn(&RunMetrics) -> u64| rs.iter().map(|r| f(r) as f64).collect::<Vec<_>>();
    let deliveries = PairedDiff::new(
        &col(&baseline_runs, RunMetrics::final_deliveries),
        &col(&enabled_runs, RunMetrics::final_deliveries),
        config.seed,
    );
    let stalled = PairedDiff::new(
        &col(&baseline_runs, RunMetrics::final_stalled),
        &col(&enabled_runs, RunMetrics::final_stalled),
        config.seed.wrapping_add(1),
    );
    Ok(Comparison {
        config: config.clone(),
        baseline: aggregate(&baseline_runs),
        enabled: aggregate(&enabled_runs),
        deliveries,
        stalled,
        trades_completed: enabled_runs.iter().map(|r| r.trades.completed).sum(),
        units_traded: enabled_runs.iter().map(|r| r.trades.units).sum(),
        energy_conserved: baseline_runs.iter().chain(&enabled_runs).all(|r| r.energy_conserved),
        baseline_runs,
        enabled_runs,
    })
}

/// Per-step rows: `run,step,mode,total_deliveries,stalled,swarm_energy,mean_energy`.
pub fn write_csv<'a>(runs: impl IntoIterator<Item = &'a RunMetrics>, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "run,step,mode,total_deliveries,stalled,swarm_energy,mean_energy")?;
    for r in runs {
        for m in &r.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.4}",
                r.run,
                m.step,
                r.mode.name(),
                m.total_deliveries,
                m.stalled,
                m.swarm_energy,
                m.mean_energy
            )?;
        }
    }
    Ok(())
}
