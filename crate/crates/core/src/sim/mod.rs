//! Episode simulation, Monte Carlo aggregation, model files and CSV output.

mod csv;
mod episode;
mod harness;
mod model_file;

pub use csv::{format_g12, CsvTable};
pub use episode::{run_episode, EpisodeResult, EpisodeStats, Instance, PolicyKind};
pub use harness::{
    exact_transient_gap, monte_carlo, neumaier_sum, reward_gap_check, super_efficiency_check, switching_report,
    CurveRow, MonteCarloRun, RegretCurve, RewardGapReport, RewardGapRow, SuperEfficiencyReport, SwitchingReport,
};
pub use model_file::{parse_model, read_model, write_model, ModelFileError};

use thiserror::Error;

use crate::lower_bound::LowerBoundError;
use crate::markov::ModelError;
use crate::params::GridError;
use crate::strategy::StrategyError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    LowerBound(#[from] LowerBoundError),
    #[error("unknown parameter point {0}")]
    UnknownPoint(usize),
    #[error("bad set of point {theta} is not empty: {points:?}")]
    NonEmptyBadSet { theta: usize, points: Vec<usize> },
    #[error("invalid experiment setup: {0}")]
    Setup(String),
}
