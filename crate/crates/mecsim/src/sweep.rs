//! Single runs and K/M sweeps with CSV metrics and line-delimited traces.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::env::DemandModel;
use crate::sim::{self, PlannerKind, RunMetrics, SimConfig, SimError, SimTrace};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep values must be non-empty and strictly increasing")]
    InvalidValues,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    K,
    M,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::K => write!(f, "K"),
            SweepAxis::M => write!(f, "M"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub reps: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() || self.reps == 0 {
            return Err(SweepError::InvalidValues);
        }
        for pair in self.values.windows(2) {
            if pair[0] >= pair[1] {
                return Err(SweepError::InvalidValues);
            }
        }
        Ok(())
    }
}

/// Stable per-repetition seed: mixes the parent seed, the axis value's bit
/// pattern and the repetition index through splitmix64.
pub fn derive_seed(parent: u64, axis_value: f64, rep: usize) -> u64 {
    let mut z = parent
        .wrapping_add(axis_value.to_bits())
        .wrapping_add(rep as u64)
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// The fixed metrics header for single runs.
pub const METRICS_HEADER: &str =
    "seed,planner,demand_model,K,M,eta,beta,qos,avg_path_raw,avg_path_norm,avg_risk,ticks,deadlock";

/// Sweep tables add the repetition index and per-user completion ticks.
pub const SWEEP_HEADER: &str =
    "seed,planner,demand_model,K,M,eta,beta,qos,avg_path_raw,avg_path_norm,avg_risk,ticks,deadlock,rep,user_completion";

#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub seed: u64,
    pub planner: PlannerKind,
    pub demand_model: DemandModel,
    pub k_risk: f64,
    pub m_demand: f64,
    pub eta: f64,
    pub beta: f64,
    pub metrics: RunMetrics,
    pub rep: Option<usize>,
    /// Tick at which each user's demand first reached zero, if ever.
    pub user_completion: Vec<Option<usize>>,
}

fn planner_name(p: PlannerKind) -> &'static str {
    match p {
        PlannerKind::Rl => "rl",
        PlannerKind::Astar => "astar",
    }
}

fn demand_model_name(m: DemandModel) -> &'static str {
    match m {
        DemandModel::Sigmoid => "sigmoid",
        DemandModel::Linear { .. } => "linear",
    }
}

impl MetricsRow {
    pub fn csv_line(&self, with_sweep_columns: bool) -> String {
        let m = &self.metrics;
        let mut line = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            planner_name(self.planner),
            demand_model_name(self.demand_model),
            self.k_risk,
            self.m_demand,
            self.eta,
            self.beta,
            m.qos,
            m.avg_path_length_raw,
            m.avg_path_length_normalized,
            m.avg_risk,
            m.ticks_used,
            m.deadlock
        );
        if with_sweep_columns {
            let completion: Vec<String> = self
                .user_completion
                .iter()
                .map(|c| match c {
                    Some(t) => t.to_string(),
                    None => String::new(),
                })
                .collect();
            line.push_str(&format!(
                ",{},{}",
                self.rep.unwrap_or(0),
                completion.join(";")
            ));
        }
        line
    }
}

fn completion_ticks(trace: &SimTrace, n_users: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; n_users];
    for snap in &trace.demand_snapshots {
        for (j, &d) in snap.demands.iter().enumerate() {
            if d == 0.0 && out[j].is_none() {
                out[j] = Some(snap.tick);
            }
        }
    }
    out
}

/// Execute one run and package its metrics row.
pub fn run_once(config: &SimConfig) -> Result<(SimTrace, MetricsRow), SweepError> {
    let (trace, metrics) = sim::run(config)?;
    let row = MetricsRow {
        seed: config.seed,
        planner: config.planner_kind,
        demand_model: config.demand_model,
        k_risk: config.reward_params.k_risk,
        m_demand: config.reward_params.m_demand,
        eta: config.world.demand_params.eta,
        beta: config.world.demand_params.beta,
        metrics,
        rep: None,
        user_completion: completion_ticks(&trace, config.world.users.len()),
    };
    Ok((trace, row))
}

/// Run every (value, repetition) point of the sweep. Points execute in
/// parallel; the returned rows are sorted by (value, rep) regardless of
/// execution order. A failed point is skipped and reported, the sweep
/// continues.
pub fn run_sweep(
    base: &SimConfig,
    spec: &SweepSpec,
) -> Result<(Vec<MetricsRow>, Vec<String>), SweepError> {
    spec.validate()?;
    let points: Vec<(usize, f64, usize)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(vi, &v)| (0..spec.reps).map(move |rep| (vi, v, rep)))
        .collect();

    let results: Vec<Result<(usize, usize, MetricsRow), String>> = points
        .par_iter()
        .map(|&(vi, value, rep)| {
            let mut config = base.clone();
            match spec.axis {
                SweepAxis::K => config.reward_params.k_risk = value,
                SweepAxis::M => config.reward_params.m_demand = value,
            }
            config.seed = derive_seed(base.seed, value, rep);
            match run_once(&config) {
                Ok((_, mut row)) => {
                    row.rep = Some(rep);
                    Ok((vi, rep, row))
                }
                Err(e) => Err(format!("{}={} rep={}: {}", spec.axis, value, rep, e)),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(entry) => rows.push(entry),
            Err(msg) => failures.push(msg),
        }
    }
    rows.sort_by_key(|(vi, rep, _)| (*vi, *rep));
    Ok((rows.into_iter().map(|(_, _, row)| row).collect(), failures))
}

/// Render the trace as line-delimited JSON, one record per line.
pub fn trace_to_jsonl(trace: &SimTrace) -> String {
    #[derive(Serialize)]
    #[serde(tag = "type", rename_all = "snake_case")]
    enum Record<'a> {
        Event {
            tick: usize,
            uav: usize,
            x: f64,
            y: f64,
            replanned: bool,
            served: &'a [usize],
        },
        Demand {
            tick: usize,
            demands: &'a [f64],
        },
    }
    let mut out = String::new();
    let mut snapshots = trace.demand_snapshots.iter().peekable();
    for e in &trace.events {
        while let Some(s) = snapshots.peek() {
            if s.tick < e.tick {
                out.push_str(&serde_json::to_string(&Record::Demand {
                    tick: s.tick,
                    demands: &s.demands,
                }).unwrap());
                out.push('\n');
                snapshots.next();
            } else {
                break;
            }
        }
        out.push_str(&serde_json::to_string(&Record::Event {
            tick: e.tick,
            uav: e.uav_id,
            x: e.pos.x,
            y: e.pos.y,
            replanned: e.replanned,
            served: &e.served_user_ids,
        }).unwrap());
        out.push('\n');
    }
    for s in snapshots {
        out.push_str(&serde_json::to_string(&Record::Demand {
            tick: s.tick,
            demands: &s.demands,
        }).unwrap());
        out.push('\n');
    }
    out
}
