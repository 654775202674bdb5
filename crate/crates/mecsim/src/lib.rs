//! Deterministic multi-UAV mobile-edge-computing simulator.
//!
//! UAV agents plan risk-aware, demand-seeking paths over a unit-square
//! grid. Each agent trains a cost-to-go field over the grid from what it
//! has actually observed, follows it toward a shared target, serves
//! terminal-user demand along the way, and replans whenever its scan turns
//! up something new (including peer UAVs, which count as obstacles). A
//! greedy eight-direction baseline shares the same environment model and
//! metrics for comparison.
//!
//! The ground-truth field math lives in [`env`]:
//!
//! ```
//! use mecsim::env::{demand_signal, point_risk, DemandParams, Obstacle, Point2};
//!
//! let params = DemandParams::new(2.0, 8.0, 0.5, 0.2)?;
//! // the detection signal is zero at zero demand and saturates near one
//! assert_eq!(demand_signal(0.0, &params), 0.0);
//! assert!(demand_signal(100.0, &params) > 0.999);
//!
//! let obstacle = Obstacle::new(Point2::new(0.5, 0.5), 0.05)?;
//! let risk = point_risk(&[obstacle], Point2::new(0.5, 0.45));
//! assert!(risk > 0.0 && risk <= 1.0);
//! # Ok::<(), mecsim::env::EnvError>(())
//! ```
//!
//! Training relaxes every grid node against randomly ordered relay nodes;
//! with zero risk and demand weights the field collapses to plain distance
//! to the target:
//!
//! ```
//! use mecsim::env::{DemandModel, DemandParams, Point2, World};
//! use mecsim::planner::{init_cost_matrix, train, Knowledge, RewardParams};
//!
//! let world = World::new(
//!     5, vec![], vec![], Point2::new(1.0, 1.0),
//!     DemandParams::new(2.0, 8.0, 0.5, 0.2)?,
//! )?;
//! let mut cost = init_cost_matrix(&world);
//! let weights = RewardParams { k_risk: 0.0, m_demand: 0.0 };
//! train(&mut cost, &world, &Knowledge::default(), &weights,
//!       DemandModel::Sigmoid, 3, 42).unwrap();
//! for node in 0..world.node_count() {
//!     let expected = world.node_pos(node).distance(world.target);
//!     assert!((cost.values[node] - expected).abs() < 1e-12);
//! }
//! # Ok::<(), mecsim::env::EnvError>(())
//! ```
//!
//! Whole episodes run through [`sim::run`]; scenario files and sweeps are
//! handled by [`scenario`] and [`sweep`], which back the `mecsim` CLI.

pub mod astar;
pub mod env;
pub mod planner;
pub mod scenario;
pub mod sim;
pub mod sweep;

// Every code block in the guide compiles and runs as a doc-test, so the
// book cannot drift from the crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    struct Overview;
    #[doc = include_str!("../../../book/src/risk.md")]
    struct Risk;
    #[doc = include_str!("../../../book/src/demand.md")]
    struct Demand;
    #[doc = include_str!("../../../book/src/training.md")]
    struct Training;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/baseline.md")]
    struct Baseline;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
