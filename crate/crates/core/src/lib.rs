//! Two-tier spectrum management for cellular/Wi-Fi vehicular networks:
//! spectrum slicing among base station groups, QoS-constrained allocation and
//! association for autonomous vehicles, and Wi-Fi AP transmit power control,
//! solved jointly by an alternating search over the three concave blocks.

pub mod baselines;
pub mod harness;
pub mod lp;
pub mod model;
pub mod qos;
pub mod scenario;
pub mod solvers;

pub use baselines::{run_max_sinr, run_max_utility, run_proposed, Scheme, SchemeResult};
pub use harness::{ExperimentConfig, ExperimentPlan, ResultRow, SweepAxis};
pub use model::{Allocation, Association, PowerAndSinr, SlicingRatios};
pub use qos::TrafficSpec;
pub use scenario::{build_scenario, Deployment, RoadConfig, Scenario};
pub use solvers::{run_acs, AcsConfig, AcsSolution, SolverError};
