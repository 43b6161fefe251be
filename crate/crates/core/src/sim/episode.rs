use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::markov::{sample_index, sample_transition, ArmId};
use crate::model::Model;
use crate::params::ParameterGrid;
use crate::strategy::{mle, Action, LikelihoodModel, PaperStrategy, Stage, StrategyConfig, StrategyError};

/// A model with its precomputed grid tables and likelihood tables.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: Model,
    pub grid: ParameterGrid,
    pub lik: LikelihoodModel,
}

impl Instance {
    pub fn new(model: Model) -> Result<Self, SimError> {
        let grid = ParameterGrid::from_model(&model)?;
        let lik = LikelihoodModel::new(&model);
        Ok(Self { model, grid, lik })
    }

    pub fn check_point(&self, theta: usize) -> Result<(), SimError> {
        if theta < self.grid.point_count() {
            Ok(())
        } else {
            Err(SimError::UnknownPoint(theta))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// The four-stage rule of [`PaperStrategy`].
    Paper,
    /// After the estimation pulls, always the arm with the best estimated
    /// mean among those still reachable.
    Greedy,
    /// Round-robin inside each group, with an equal share of the budget per
    /// group.
    Uniform,
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "greedy" => Ok(Self::Greedy),
            "uniform" => Ok(Self::Uniform),
            _ => Err(format!("unknown policy {s:?} (expected paper, greedy or uniform)")),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Paper => "paper",
            Self::Greedy => "greedy",
            Self::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub arms: Vec<ArmId>,
    /// `T_N(ij)`, in the order of `arms`.
    pub counts: Vec<u64>,
    pub realized_reward: f64,
    /// `Σ μ_ij(θ) T_N(ij)`.
    pub expected_reward: f64,
    /// `Σ (μ*(θ) − μ_ij(θ)) T_N(ij)`.
    pub regret: f64,
    /// Arm changes where at least one side is not optimal under `θ`.
    pub switches: u64,
    /// Arm changes between consecutive estimation-stage pulls.
    pub estimation_switches: u64,
    /// Pulls of non-optimal arms of the first optimal group.
    pub inferior_optimal_group_pulls: u64,
    pub pull_log: Vec<ArmId>,
    /// Stage of every pull; empty for the baselines.
    pub stage_log: Vec<Stage>,
    /// Unrejected jobs per group when the four-stage rule stopped.
    pub unrejected: Option<Vec<BTreeSet<usize>>>,
    pub seed: u64,
}

impl EpisodeResult {
    pub fn count(&self, arm: ArmId) -> u64 {
        self.arms.iter().position(|&a| a == arm).map_or(0, |i| self.counts[i])
    }

    /// Group indices never decrease along the pull log.
    pub fn respects_precedence(&self) -> bool {
        self.pull_log.windows(2).all(|w| w[0].group <= w[1].group)
    }

    pub fn stats(&self, grid: &ParameterGrid, theta: usize) -> EpisodeStats {
        let ell = grid.group_index(theta);
        let optimal = grid.optimal_set(theta);
        EpisodeStats {
            regret: self.regret,
            switches: self.switches,
            estimation_switches: self.estimation_switches,
            inferior_optimal_group_pulls: self.inferior_optimal_group_pulls,
            reward_gap: self.realized_reward - self.expected_reward,
            true_job_unrejected: self.unrejected.as_ref().map(|u| optimal.iter().any(|j| u[ell].contains(j))),
        }
    }
}

/// The per-episode numbers kept by the Monte Carlo harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub regret: f64,
    pub switches: u64,
    pub estimation_switches: u64,
    pub inferior_optimal_group_pulls: u64,
    /// Realized reward minus `Σ μ_ij T_N(ij)`.
    pub reward_gap: f64,
    /// Whether some optimal job of `θ` survived the testing stage.
    pub true_job_unrejected: Option<bool>,
}

enum Runner<'a> {
    Paper(Box<PaperStrategy<'a>>),
    Greedy(Greedy<'a>),
    Uniform(Uniform),
}

impl Runner<'_> {
    fn next(&mut self) -> Result<Option<(ArmId, Option<Stage>)>, SimError> {
        Ok(match self {
            Self::Paper(p) => match p.next_action()? {
                Action::Pull(arm) => Some((arm, Some(p.state().stage))),
                Action::Stop => None,
            },
            Self::Greedy(g) => g.next()?.map(|a| (a, None)),
            Self::Uniform(u) => u.next().map(|a| (a, None)),
        })
    }

    fn observe(&mut self, arm: ArmId, state: usize) -> Result<(), SimError> {
        match self {
            Self::Paper(p) => p.observe(arm, state)?,
            Self::Greedy(g) => g.observe(arm, state),
            Self::Uniform(_) => {}
        }
        Ok(())
    }
}

/// Simulates one full episode of `config.horizon` pulls with the chains
/// running under `theta_true`.
pub fn run_episode(
    inst: &Instance,
    theta_true: usize,
    config: &StrategyConfig,
    policy: PolicyKind,
    seed: u64,
) -> Result<EpisodeResult, SimError> {
    inst.check_point(theta_true)?;
    config.validate(&inst.grid)?;
    let model = &inst.model;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arms: Vec<ArmId> = inst.lik.arms().to_vec();
    let mut states: Vec<usize> = Vec::with_capacity(arms.len());
    for &id in &arms {
        states.push(sample_index(model.arm(id).initial(theta_true)?, rng.gen()));
    }
    let kernels: Vec<_> = arms.iter().map(|&id| model.arm(id).kernel(theta_true)).collect::<Result<_, _>>()?;

    let mut runner = match policy {
        PolicyKind::Paper => {
            Runner::Paper(Box::new(PaperStrategy::new(&inst.grid, &inst.lik, config.clone(), &states)?))
        }
        PolicyKind::Greedy => Runner::Greedy(Greedy::new(inst, config, &states)?),
        PolicyKind::Uniform => Runner::Uniform(Uniform::new(&inst.grid, config.horizon)),
    };

    let mut counts = vec![0u64; arms.len()];
    let mut realized = 0.0;
    let mut pull_log = Vec::with_capacity(config.horizon as usize);
    let mut stage_log = Vec::new();
    while let Some((arm, stage)) = runner.next()? {
        if pull_log.len() as u64 >= config.horizon {
            return Err(StrategyError::BudgetExceeded(config.horizon).into());
        }
        let idx = inst.lik.index(arm).ok_or(StrategyError::UnknownArm(arm))?;
        let next = sample_transition(kernels[idx], states[idx], &mut rng);
        states[idx] = next;
        realized += model.space.reward(next);
        counts[idx] += 1;
        pull_log.push(arm);
        if let Some(s) = stage {
            stage_log.push(s);
        }
        runner.observe(arm, next)?;
    }
    if pull_log.len() as u64 != config.horizon {
        return Err(SimError::Setup(format!("policy stopped after {} of {} pulls", pull_log.len(), config.horizon)));
    }

    let grid = &inst.grid;
    let best = grid.best_mu(theta_true);
    let mu = |a: ArmId| grid.mu(a, theta_true);
    let expected_reward = arms.iter().zip(&counts).map(|(&a, &c)| mu(a) * c as f64).sum();
    let regret =
        arms.iter().zip(&counts).filter(|(&a, _)| mu(a) < best).map(|(&a, &c)| (best - mu(a)) * c as f64).sum();
    let switches = pull_log.windows(2).filter(|w| w[0] != w[1] && mu(w[0]).min(mu(w[1])) < best).count() as u64;
    let estimation_switches = pull_log
        .windows(2)
        .zip(stage_log.windows(2))
        .filter(|(p, s)| s[0] == Stage::Estimation && s[1] == Stage::Estimation && p[0] != p[1])
        .count() as u64;
    let ell = grid.group_index(theta_true);
    let optimal = grid.optimal_set(theta_true);
    let inferior_optimal_group_pulls =
        arms.iter().zip(&counts).filter(|(a, _)| a.group == ell && !optimal.contains(&a.arm)).map(|(_, &c)| c).sum();
    let unrejected = match runner {
        Runner::Paper(p) => Some(p.into_state().unrejected),
        _ => None,
    };
    Ok(EpisodeResult {
        arms,
        counts,
        realized_reward: realized,
        expected_reward,
        regret,
        switches,
        estimation_switches,
        inferior_optimal_group_pulls,
        pull_log,
        stage_log,
        unrejected,
        seed,
    })
}

struct Greedy<'a> {
    inst: &'a Instance,
    histories: crate::strategy::Histories,
    horizon: u64,
    used: u64,
    warmup: Vec<ArmId>,
    group: usize,
}

impl<'a> Greedy<'a> {
    fn new(inst: &'a Instance, config: &StrategyConfig, states: &[usize]) -> Result<Self, SimError> {
        let histories = crate::strategy::Histories::new(&inst.lik, states)?;
        let mut warmup: Vec<ArmId> =
            inst.grid.arms_in_group(0).flat_map(|a| std::iter::repeat_n(a, config.n0)).collect();
        warmup.reverse();
        Ok(Self { inst, histories, horizon: config.horizon, used: 0, warmup, group: 0 })
    }

    fn next(&mut self) -> Result<Option<ArmId>, SimError> {
        if self.used == self.horizon {
            return Ok(None);
        }
        self.used += 1;
        if let Some(a) = self.warmup.pop() {
            return Ok(Some(a));
        }
        let grid = &self.inst.grid;
        let theta_hat = mle(&self.histories, &self.inst.lik, grid.group_count() - 1)?;
        let mut best: Option<(ArmId, f64)> = None;
        for arm in grid.arms().filter(|a| a.group >= self.group) {
            let m = grid.mu(arm, theta_hat);
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((arm, m));
            }
        }
        let (arm, _) = best.expect("later groups are never empty");
        self.group = arm.group;
        Ok(Some(arm))
    }

    fn observe(&mut self, arm: ArmId, state: usize) {
        let idx = self.inst.lik.index(arm).expect("greedy pulls model arms");
        self.histories.record(&self.inst.lik, idx, state);
    }
}

struct Uniform {
    arms_per_group: Vec<usize>,
    horizon: u64,
    used: u64,
}

impl Uniform {
    fn new(grid: &ParameterGrid, horizon: u64) -> Self {
        Self { arms_per_group: grid.arms_per_group().to_vec(), horizon, used: 0 }
    }

    fn next(&mut self) -> Option<ArmId> {
        if self.used == self.horizon {
            return None;
        }
        let groups = self.arms_per_group.len() as u64;
        let share = self.horizon / groups;
        // the last group also takes the remainder
        let group = (self.used / share.max(1)).min(groups - 1);
        let within = self.used - group * share;
        self.used += 1;
        let g = group as usize;
        Some(ArmId::new(g, (within % self.arms_per_group[g] as u64) as usize))
    }
}
