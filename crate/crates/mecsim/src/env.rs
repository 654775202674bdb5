//! Ground-truth scene model and the closed-form field math: Gaussian
//! obstacle risk, line-integral path risk, sigmoid demand detection and
//! demand service.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("eta must be > 1, got {0}")]
    InvalidEta(f64),
    #[error("beta must be > 0, got {0}")]
    InvalidBeta(f64),
    #[error("tau must be > 0, got {0}")]
    InvalidTau(f64),
    #[error("epsilon must be > 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("sigma must be > 0, got {0}")]
    InvalidSigma(f64),
    #[error("grid_n must be >= 2, got {0}")]
    InvalidGridN(usize),
    #[error("target ({0}, {1}) does not coincide with a grid node")]
    TargetOffGrid(f64, f64),
    #[error("point ({0}, {1}) outside the unit square")]
    OutOfBounds(f64, f64),
    #[error("demand must satisfy 0 <= remaining <= initial, got {0} / {1}")]
    InvalidDemand(f64, f64),
}

/// A point in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn in_unit_square(self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

/// A risk source with Gaussian spread.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Obstacle {
    pub position: Point2,
    pub sigma: f64,
}

impl Obstacle {
    pub fn new(position: Point2, sigma: f64) -> Result<Self, EnvError> {
        if !(sigma > 0.0) {
            return Err(EnvError::InvalidSigma(sigma));
        }
        Ok(Obstacle { position, sigma })
    }
}

/// A fixed ground entity with scalar demand served by UAVs in range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TerminalUser {
    pub position: Point2,
    pub initial_demand: f64,
    pub remaining_demand: f64,
}

impl TerminalUser {
    pub fn new(position: Point2, initial_demand: f64) -> Result<Self, EnvError> {
        if !(initial_demand >= 0.0) {
            return Err(EnvError::InvalidDemand(initial_demand, initial_demand));
        }
        Ok(TerminalUser {
            position,
            initial_demand,
            remaining_demand: initial_demand,
        })
    }
}

/// Parameters of the demand detection and service model.
///
/// `eta` and `beta` shape the sigmoid signal, `tau` is the service rate per
/// unit time per UAV, `epsilon` the service radius. Validity requires
/// `eta > 1` and `beta > 0`; the sigmoid degenerates outside that range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DemandParams {
    pub eta: f64,
    pub beta: f64,
    pub tau: f64,
    pub epsilon: f64,
}

impl DemandParams {
    pub fn new(eta: f64, beta: f64, tau: f64, epsilon: f64) -> Result<Self, EnvError> {
        if !(eta > 1.0) {
            return Err(EnvError::InvalidEta(eta));
        }
        if !(beta > 0.0) {
            return Err(EnvError::InvalidBeta(beta));
        }
        if !(tau > 0.0) {
            return Err(EnvError::InvalidTau(tau));
        }
        if !(epsilon > 0.0) {
            return Err(EnvError::InvalidEpsilon(epsilon));
        }
        Ok(DemandParams {
            eta,
            beta,
            tau,
            epsilon,
        })
    }
}

/// How raw remaining demand maps to the detection signal in the planner cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandModel {
    /// `U(d) = 1 - exp(-d^eta / (d + beta))`.
    Sigmoid,
    /// `d / scale`, clamped to [0, 1]. The comparison baseline.
    Linear { scale: f64 },
}

impl DemandModel {
    pub fn linear_default() -> Self {
        // matches the demand generator range upper bound
        DemandModel::Linear { scale: 10.0 }
    }
}

/// Immutable ground-truth scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct World {
    pub grid_n: usize,
    pub obstacles: Vec<Obstacle>,
    pub users: Vec<TerminalUser>,
    pub target: Point2,
    pub demand_params: DemandParams,
}

impl World {
    pub fn new(
        grid_n: usize,
        obstacles: Vec<Obstacle>,
        users: Vec<TerminalUser>,
        target: Point2,
        demand_params: DemandParams,
    ) -> Result<Self, EnvError> {
        if grid_n < 2 {
            return Err(EnvError::InvalidGridN(grid_n));
        }
        for o in &obstacles {
            if !o.position.in_unit_square() {
                return Err(EnvError::OutOfBounds(o.position.x, o.position.y));
            }
        }
        for u in &users {
            if !u.position.in_unit_square() {
                return Err(EnvError::OutOfBounds(u.position.x, u.position.y));
            }
        }
        let world = World {
            grid_n,
            obstacles,
            users,
            target,
            demand_params,
        };
        let snapped = world.node_pos(world.nearest_node(target));
        if snapped.distance(target) > 1e-9 {
            return Err(EnvError::TargetOffGrid(target.x, target.y));
        }
        Ok(world)
    }

    /// Number of grid nodes.
    pub fn node_count(&self) -> usize {
        self.grid_n * self.grid_n
    }

    /// Grid spacing along one axis.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid_n - 1) as f64
    }

    /// Position of node `idx` (row-major, index = iy * N + ix).
    pub fn node_pos(&self, idx: usize) -> Point2 {
        let n = self.grid_n;
        let ix = idx % n;
        let iy = idx / n;
        let h = self.spacing();
        Point2::new(ix as f64 * h, iy as f64 * h)
    }

    /// Index of the grid node closest to `p`.
    pub fn nearest_node(&self, p: Point2) -> usize {
        let n = self.grid_n;
        let h = self.spacing();
        let ix = ((p.x / h).round() as isize).clamp(0, n as isize - 1) as usize;
        let iy = ((p.y / h).round() as isize).clamp(0, n as isize - 1) as usize;
        iy * n + ix
    }

    pub fn target_node(&self) -> usize {
        self.nearest_node(self.target)
    }

    /// 8-neighborhood of a node, in ascending index order.
    pub fn neighbors8(&self, idx: usize) -> Vec<usize> {
        let n = self.grid_n as isize;
        let ix = (idx % self.grid_n) as isize;
        let iy = (idx / self.grid_n) as isize;
        let mut out = Vec::with_capacity(8);
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (ix + dx, iy + dy);
                if nx >= 0 && nx < n && ny >= 0 && ny < n {
                    out.push((ny * n + nx) as usize);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Risk contribution of a single obstacle at `p`.
///
/// Implements the exponent denominator `2 sigma` (not `2 sigma^2`) and
/// clamps to [0, 1] so the complement product in [`point_risk`] stays a
/// probability even for small sigma.
pub fn single_risk(obstacle: &Obstacle, p: Point2) -> f64 {
    let d = p.distance(obstacle.position);
    let raw = (1.0 / ((2.0 * std::f64::consts::PI).sqrt() * obstacle.sigma))
        * (-d * d / (2.0 * obstacle.sigma)).exp();
    raw.clamp(0.0, 1.0)
}

/// Combined risk at `p`: complement of the product of survival probabilities.
pub fn point_risk(obstacles: &[Obstacle], p: Point2) -> f64 {
    let mut survive = 1.0;
    for o in obstacles {
        survive *= 1.0 - single_risk(o, p);
    }
    1.0 - survive
}

/// Line integral of the combined risk field over the straight segment from
/// `p` to `q`, composite trapezoid rule with `samples_per_unit` density.
pub fn segment_risk(obstacles: &[Obstacle], p: Point2, q: Point2, samples_per_unit: usize) -> f64 {
    let len = p.distance(q);
    if len == 0.0 || obstacles.is_empty() {
        return 0.0;
    }
    let points = ((len * samples_per_unit as f64).ceil() as usize + 1).max(2);
    let mut sum = 0.0;
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let s = Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
        let r = point_risk(obstacles, s);
        let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        sum += w * r;
    }
    sum * len / (points - 1) as f64
}

/// Sigmoid demand detection signal `U(d) = 1 - exp(-d^eta / (d + beta))`.
pub fn demand_signal(d: f64, params: &DemandParams) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    1.0 - (-(d.powf(params.eta)) / (d + params.beta)).exp()
}

/// Detection signal under the configured demand model.
pub fn demand_signal_model(d: f64, params: &DemandParams, model: DemandModel) -> f64 {
    match model {
        DemandModel::Sigmoid => demand_signal(d, params),
        DemandModel::Linear { scale } => (d / scale).clamp(0.0, 1.0),
    }
}

/// Accumulated detection signal over users within the service radius of `p`.
/// Membership is boundary-inclusive.
pub fn detected_demand(
    users: &[TerminalUser],
    p: Point2,
    params: &DemandParams,
    model: DemandModel,
) -> f64 {
    users
        .iter()
        .filter(|u| p.distance(u.position) <= params.epsilon)
        .map(|u| demand_signal_model(u.remaining_demand, params, model))
        .sum()
}

/// One service update: each user loses `tau` per UAV within range, floored
/// at zero.
pub fn serve(
    users: &[TerminalUser],
    uav_positions: &[Point2],
    params: &DemandParams,
) -> Vec<TerminalUser> {
    users
        .iter()
        .map(|u| {
            let in_range = uav_positions
                .iter()
                .filter(|p| p.distance(u.position) <= params.epsilon)
                .count();
            let mut updated = *u;
            updated.remaining_demand =
                (u.remaining_demand - params.tau * in_range as f64).max(0.0);
            updated
        })
        .collect()
}
