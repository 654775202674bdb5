//! Per-UAV planning: move reward, stochastic cost-matrix training and path
//! extraction.
//!
//! The cost matrix `G` is the agent's learned value function over grid
//! nodes. Training runs full random-permutation sweeps: every node plays
//! the relay role `p_r` once per epoch, in a seed-determined order, and
//! every node `p_i` is relaxed against it with a min-update. A direct edge
//! exists between every node pair, so the update graph is complete.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{detected_demand, segment_risk, DemandModel, Obstacle, TerminalUser, World};

/// Default sample density for the risk line integral.
pub const DEFAULT_SAMPLES_PER_UNIT: usize = 64;

/// Convergence threshold for the optional early stop between sweeps.
pub const TRAIN_EARLY_STOP: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("epochs must be >= 1, got {0}")]
    InvalidEpochs(usize),
}

/// Risk tolerance weight `K` and service priority weight `M`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardParams {
    pub k_risk: f64,
    pub m_demand: f64,
}

/// What a single UAV knows: observed obstacles (true ones plus peers
/// rendered as pseudo-obstacles) and the users' current remaining demands.
#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    pub known_obstacles: Vec<Obstacle>,
    pub users: Vec<TerminalUser>,
}

/// Trained cost-to-go field over grid nodes.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub values: Vec<f64>,
    pub grid_n: usize,
    pub target_index: usize,
    pub epochs_trained: usize,
}

/// An ordered waypoint sequence over grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<usize>,
    /// Set when descent extraction hit a local minimum before the target.
    pub stalled: bool,
}

/// Move cost from `p_i` to `p_r`: geometric distance, K-weighted path risk
/// over the known obstacles, and M-weighted inverse detected demand at the
/// current position `p_i`.
pub fn reward(
    world: &World,
    p_i: usize,
    p_r: usize,
    knowledge: &Knowledge,
    params: &RewardParams,
    model: DemandModel,
) -> f64 {
    let a = world.node_pos(p_i);
    let b = world.node_pos(p_r);
    let mut cost = a.distance(b);
    if params.k_risk > 0.0 && !knowledge.known_obstacles.is_empty() {
        cost += params.k_risk
            * segment_risk(&knowledge.known_obstacles, a, b, DEFAULT_SAMPLES_PER_UNIT);
    }
    if params.m_demand != 0.0 {
        let demand = detected_demand(&knowledge.users, a, &world.demand_params, model);
        cost += params.m_demand / (1.0 + demand);
    }
    cost
}

/// Fresh cost matrix: 0 at the target node, infinity everywhere else.
pub fn init_cost_matrix(world: &World) -> CostMatrix {
    let mut values = vec![f64::INFINITY; world.node_count()];
    let target_index = world.target_node();
    values[target_index] = 0.0;
    CostMatrix {
        values,
        grid_n: world.grid_n,
        target_index,
        epochs_trained: 0,
    }
}

/// Train the cost matrix for `epochs` full sweeps. Each sweep visits every
/// node once as `p_r` in a seed-determined random permutation and relaxes
/// every `p_i` against it. Stops early when a whole sweep changes no entry
/// by more than [`TRAIN_EARLY_STOP`].
pub fn train(
    cost: &mut CostMatrix,
    world: &World,
    knowledge: &Knowledge,
    params: &RewardParams,
    model: DemandModel,
    epochs: usize,
    rng_seed: u64,
) -> Result<(), PlannerError> {
    if epochs < 1 {
        return Err(PlannerError::InvalidEpochs(epochs));
    }
    let n = world.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // The demand term only depends on p_i, so hoist it out of the pair loop.
    let demand_term: Vec<f64> = (0..n)
        .map(|i| {
            if params.m_demand != 0.0 {
                let d = detected_demand(
                    &knowledge.users,
                    world.node_pos(i),
                    &world.demand_params,
                    model,
                );
                params.m_demand / (1.0 + d)
            } else {
                0.0
            }
        })
        .collect();

    let use_risk = params.k_risk > 0.0 && !knowledge.known_obstacles.is_empty();

    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut max_change = 0.0f64;
        for &p_r in &order {
            let g_r = cost.values[p_r];
            if !g_r.is_finite() {
                continue;
            }
            let b = world.node_pos(p_r);
            // Relaxations for a fixed p_r touch disjoint entries, so this
            // inner loop is deterministic under parallel execution.
            let changes: Vec<(usize, f64)> = cost
                .values
                .par_iter()
                .enumerate()
                .filter_map(|(p_i, &g_i)| {
                    if p_i == p_r {
                        return None;
                    }
                    let a = world.node_pos(p_i);
                    let mut edge = a.distance(b) + demand_term[p_i];
                    if use_risk {
                        edge += params.k_risk
                            * segment_risk(
                                &knowledge.known_obstacles,
                                a,
                                b,
                                DEFAULT_SAMPLES_PER_UNIT,
                            );
                    }
                    let candidate = edge + g_r;
                    if candidate < g_i {
                        Some((p_i, candidate))
                    } else {
                        None
                    }
                })
                .collect();
            for (p_i, v) in changes {
                let delta = if cost.values[p_i].is_finite() {
                    cost.values[p_i] - v
                } else {
                    f64::INFINITY
                };
                max_change = max_change.max(delta);
                cost.values[p_i] = v;
            }
        }
        cost.epochs_trained += 1;
        if max_change < TRAIN_EARLY_STOP {
            break;
        }
    }
    debug_assert_eq!(cost.values[cost.target_index], 0.0);
    Ok(())
}

/// The global-minimum extraction procedure: pop the cheapest remaining node
/// into the path, set it to infinity, repeat until `max_length` is reached
/// or no finite entry remains. The target (value 0) is always the first
/// element, so the walk is in ascending order of cost. Ties break to the
/// lowest node index.
pub fn extract_path_verbatim(cost: &CostMatrix, max_length: usize) -> Path {
    let mut work = cost.values.clone();
    let mut waypoints = Vec::new();
    while waypoints.len() < max_length {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in work.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            match best {
                Some((_, bv)) if v >= bv => {}
                _ => best = Some((i, v)),
            }
        }
        let Some((node, _)) = best else { break };
        waypoints.push(node);
        work[node] = f64::INFINITY;
    }
    Path {
        waypoints,
        stalled: false,
    }
}

/// Neighbor-descent extraction anchored at the UAV position: from `start`,
/// repeatedly step to the 8-neighbor with the smallest strictly-improving
/// cost until the target is reached, no improvement exists, or
/// `max_length` is hit. Ties break to the lowest node index.
pub fn extract_path_descent(cost: &CostMatrix, world: &World, start: usize, max_length: usize) -> Path {
    let mut waypoints = vec![start];
    let mut current = start;
    let mut stalled = false;
    while current != cost.target_index && waypoints.len() < max_length {
        let here = cost.values[current];
        let mut best: Option<(usize, f64)> = None;
        for nb in world.neighbors8(current) {
            let v = cost.values[nb];
            if v < here {
                match best {
                    Some((_, bv)) if v >= bv => {}
                    _ => best = Some((nb, v)),
                }
            }
        }
        match best {
            Some((node, _)) => {
                waypoints.push(node);
                current = node;
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Path { waypoints, stalled }
}

/// Value-greedy continuation for a stalled descent: from `from`, repeatedly
/// jump to `argmin_r A(from, r) + G[r]` over all nodes. Any node a UAV can
/// fly to directly is a valid relay, so this escapes demand depressions the
/// 8-neighborhood cannot; each jump strictly lowers G (the move cost is
/// positive), so the chain reaches the target.
pub fn extend_stalled_path(
    path: &mut Path,
    cost: &CostMatrix,
    world: &World,
    knowledge: &Knowledge,
    params: &RewardParams,
    model: DemandModel,
    max_length: usize,
) {
    let Some(&last) = path.waypoints.last() else {
        return;
    };
    let mut current = last;
    while current != cost.target_index && path.waypoints.len() < max_length {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..cost.values.len() {
            if r == current || !cost.values[r].is_finite() {
                continue;
            }
            let q = reward(world, current, r, knowledge, params, model) + cost.values[r];
            match best {
                Some((_, bq)) if q >= bq => {}
                _ => best = Some((r, q)),
            }
        }
        let Some((node, _)) = best else { break };
        if cost.values[node] >= cost.values[current] {
            break; // no strictly improving relay; give up rather than loop
        }
        path.waypoints.push(node);
        current = node;
    }
    path.stalled = current != cost.target_index;
}
