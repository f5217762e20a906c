//! Shapley-value estimation for tabular models.
//!
//! Games map coalitions of features to scalar worth ([`games`]); estimators
//! turn a game into attributions ([`estimators`]): brute-force enumeration,
//! KernelSHAP, and the momentum-based SIM-Shapley iteration with its
//! stabilized variant.
//!
//! ```
//! use simshap::{estimators, games::TabulatedGame, EstimatorConfig};
//!
//! let mut game = TabulatedGame::from_values(3, vec![0.0, 1.0, 2.0, 4.0, 3.0, 5.0, 6.0, 9.0]).unwrap();
//! let exact = estimators::exact_shapley(&game).unwrap();
//! assert_eq!(exact, vec![2.0, 3.0, 4.0]);
//!
//! let report = estimators::sim_shapley(&mut game, &EstimatorConfig::local(3).with_seed(7)).unwrap();
//! assert!(report.efficiency_gap() < 1e-10);
//! ```

pub mod coalition;
pub mod config;
pub mod data;
pub mod error;
pub mod estimators;
pub mod games;
pub mod imputation;
pub mod metrics;
pub mod models;
pub mod parallel;
pub mod sampling;
pub mod stats;

pub use coalition::Coalition;
pub use config::{AttributionEstimate, EstimatorConfig, Execution, GameBoundary};
pub use error::{Result, ShapError};
pub use estimators::{EstimatorKind, ExplanationReport, IterationTrace};
pub use games::CooperativeGame;
