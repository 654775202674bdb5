//! Declarative scenario files: explicit scenes or seeded generators,
//! expansion, validation and round-trip serialization.

use std::path::Path as FsPath;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{DemandModel, DemandParams, EnvError, Obstacle, Point2, TerminalUser, World};
use crate::planner::RewardParams;
use crate::sim::{PathMode, PlannerKind, SimConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("invalid scenario: {0}")]
    Invalid(#[from] EnvError),
    #[error("obstacles need either `list` or `generator`")]
    MissingObstacleSpec,
    #[error("users need either `list` or `generator`")]
    MissingUserSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleEntry {
    pub position: [f64; 2],
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserEntry {
    pub position: [f64; 2],
    pub demand: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleGenerator {
    pub count: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserGenerator {
    pub count: usize,
    pub demand_min: f64,
    pub demand_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<ObstacleEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<ObstacleGenerator>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct UserSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<UserEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<UserGenerator>,
}

fn default_train_epochs() -> usize {
    3
}
fn default_cycle_window() -> usize {
    3
}
fn default_planner() -> PlannerKind {
    PlannerKind::Rl
}
fn default_demand_model() -> DemandModel {
    DemandModel::Sigmoid
}
fn default_path_mode() -> PathMode {
    PathMode::Descent
}

/// The on-disk scenario document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub grid_n: usize,
    pub target: [f64; 2],
    pub uav_starts: Vec<[f64; 2]>,
    pub seed: u64,
    pub k_risk: f64,
    pub m_demand: f64,
    pub eta: f64,
    pub beta: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub step_length: f64,
    pub obs_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ticks: Option<usize>,
    #[serde(default = "default_planner")]
    pub planner: PlannerKind,
    #[serde(default = "default_demand_model")]
    pub demand_model: DemandModel,
    #[serde(default = "default_path_mode")]
    pub path_mode: PathMode,
    #[serde(default = "default_train_epochs")]
    pub train_epochs: usize,
    #[serde(default = "default_cycle_window")]
    pub cycle_window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_uav: Option<f64>,
    #[serde(default)]
    pub obstacles: ObstacleSpec,
    #[serde(default)]
    pub users: UserSpec,
}

impl ScenarioFile {
    /// Replace generator specs with the explicit lists they expand to.
    /// Equal seeds always expand to equal scenes.
    pub fn expand(&self) -> Result<ScenarioFile, ScenarioError> {
        let mut out = self.clone();
        if out.obstacles.list.is_none() {
            let gen = out
                .obstacles
                .generator
                .as_ref()
                .ok_or(ScenarioError::MissingObstacleSpec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
            let list = (0..gen.count)
                .map(|_| {
                    let x = rng.gen_range(0.0..=1.0);
                    let y = rng.gen_range(0.0..=1.0);
                    let sigma = rng.gen_range(gen.sigma_min..=gen.sigma_max);
                    ObstacleEntry {
                        position: [x, y],
                        sigma,
                    }
                })
                .collect();
            out.obstacles.list = Some(list);
            out.obstacles.generator = None;
        }
        if out.users.list.is_none() {
            let gen = out
                .users
                .generator
                .as_ref()
                .ok_or(ScenarioError::MissingUserSpec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
            let list = (0..gen.count)
                .map(|_| {
                    let x = rng.gen_range(0.0..=1.0);
                    let y = rng.gen_range(0.0..=1.0);
                    let demand = rng.gen_range(gen.demand_min..=gen.demand_max);
                    UserEntry {
                        position: [x, y],
                        demand,
                    }
                })
                .collect();
            out.users.list = Some(list);
            out.users.generator = None;
        }
        Ok(out)
    }

    /// Validate and build the ground-truth world plus the run config.
    pub fn resolve(&self) -> Result<(World, SimConfig), ScenarioError> {
        let expanded = self.expand()?;
        let demand_params = DemandParams::new(self.eta, self.beta, self.tau, self.epsilon)?;
        let obstacles: Vec<Obstacle> = expanded
            .obstacles
            .list
            .as_ref()
            .unwrap()
            .iter()
            .map(|e| Obstacle::new(Point2::new(e.position[0], e.position[1]), e.sigma))
            .collect::<Result<_, _>>()?;
        let users: Vec<TerminalUser> = expanded
            .users
            .list
            .as_ref()
            .unwrap()
            .iter()
            .map(|e| TerminalUser::new(Point2::new(e.position[0], e.position[1]), e.demand))
            .collect::<Result<_, _>>()?;
        let target = Point2::new(self.target[0], self.target[1]);
        let world = World::new(self.grid_n, obstacles, users, target, demand_params)?;
        let config = SimConfig {
            world: world.clone(),
            uav_starts: self
                .uav_starts
                .iter()
                .map(|s| Point2::new(s[0], s[1]))
                .collect(),
            reward_params: RewardParams {
                k_risk: self.k_risk,
                m_demand: self.m_demand,
            },
            step_length: self.step_length,
            obs_radius: self.obs_radius,
            max_ticks: self
                .max_ticks
                .unwrap_or_else(|| SimConfig::default_max_ticks(self.grid_n)),
            planner_kind: self.planner,
            demand_model: self.demand_model,
            path_mode: self.path_mode,
            seed: self.seed,
            train_epochs: self.train_epochs,
            sigma_uav: self.sigma_uav,
            cycle_window: self.cycle_window,
        };
        Ok((world, config))
    }
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<ScenarioFile, ScenarioError> {
    toml::from_str(text).map_err(|source| ScenarioError::Parse {
        path: origin.to_string(),
        source,
    })
}

/// Load, expand and validate a scenario file.
pub fn load_scenario(path: &FsPath) -> Result<(World, SimConfig), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file = parse_scenario(&text, &path.display().to_string())?;
    file.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        grid_n = 5
        target = [1.0, 1.0]
        uav_starts = [[0.0, 0.0]]
        seed = 7
        k_risk = 5.0
        m_demand = 0.5
        eta = 2.0
        beta = 8.0
        tau = 0.5
        epsilon = 0.2
        step_length = 0.05
        obs_radius = 0.2

        [obstacles]
        generator = { count = 3, sigma_min = 0.01, sigma_max = 0.05, seed = 11 }

        [users]
        generator = { count = 2, demand_min = 0.0, demand_max = 10.0, seed = 12 }
    "#;

    #[test]
    fn loads_and_expands() {
        let file = parse_scenario(MINIMAL, "inline").unwrap();
        let (world, config) = file.resolve().unwrap();
        assert_eq!(world.obstacles.len(), 3);
        assert_eq!(world.users.len(), 2);
        assert_eq!(config.max_ticks, 250);
        assert_eq!(config.planner_kind, PlannerKind::Rl);
    }

    #[test]
    fn equal_seeds_equal_scenes() {
        let file = parse_scenario(MINIMAL, "inline").unwrap();
        let (w1, _) = file.resolve().unwrap();
        let (w2, _) = file.resolve().unwrap();
        assert_eq!(serde_json::to_string(&w1).unwrap(), serde_json::to_string(&w2).unwrap());
    }

    #[test]
    fn round_trip_expanded_scene() {
        let file = parse_scenario(MINIMAL, "inline").unwrap();
        let expanded = file.expand().unwrap();
        let text = toml::to_string(&expanded).unwrap();
        let reloaded = parse_scenario(&text, "rt").unwrap();
        let (w1, _) = expanded.resolve().unwrap();
        let (w2, _) = reloaded.resolve().unwrap();
        assert_eq!(serde_json::to_string(&w1).unwrap(), serde_json::to_string(&w2).unwrap());
    }

    #[test]
    fn invalid_beta_names_the_invariant() {
        let bad = MINIMAL.replace("beta = 8.0", "beta = 0.0");
        let file = parse_scenario(&bad, "inline").unwrap();
        let err = file.resolve().unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn parse_error_is_diagnosed() {
        let err = parse_scenario("grid_n = \"nope\"", "inline").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));
    }
}
