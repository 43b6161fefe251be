//! The four-stage allocation rule (estimation, experimentation, testing,
//! final) as a deterministic state machine that emits one pull at a time.
//!
//! The caller owns the true chains: it asks for the next arm, draws the
//! transition, and reports the new state back through `observe`.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::lower_bound::{empirical_lp, AllocationSolution, LowerBoundError};
use crate::markov::ArmId;
use crate::model::Model;
use crate::params::{GridError, ParameterGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error("every parameter point gives the observed path zero probability")]
    ZeroLikelihood,
    #[error("scheduled pull would exceed the budget of {0}")]
    BudgetExceeded(u64),
    #[error("arm {0} is not part of the model")]
    UnknownArm(ArmId),
    #[error("state {state} is outside the state space of arm {arm}")]
    UnknownState { arm: ArmId, state: usize },
    #[error("arm {0} was handed out and its observation is still missing")]
    AwaitingObservation(ArmId),
    #[error("observation reported for {got} but {expected:?} was requested")]
    UnexpectedObservation { expected: Option<ArmId>, got: ArmId },
    #[error(transparent)]
    LowerBound(#[from] LowerBoundError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Estimation,
    Experimentation,
    Testing,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Pull(ArmId),
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub n0: usize,
    pub n1: usize,
    pub delta: f64,
}

/// `n0 = ⌈(ln N)^{3/4}⌉`, `n1 = ⌈(ln N)^{1/2}⌉`, `δ = (ln N)^{-1/4}`, with
/// `n0·J_1 ≤ N/2` and `n1 ≤ n0` enforced.
pub fn default_schedules(horizon: u64, first_group_arms: usize) -> Schedules {
    let log_n = (horizon.max(3) as f64).ln();
    let mut n0 = log_n.powf(0.75).ceil() as usize;
    let n1 = log_n.sqrt().ceil() as usize;
    let cap = (horizon / 2) as usize / first_group_arms.max(1);
    n0 = n0.min(cap).max(1);
    Schedules { n0, n1: n1.min(n0).max(1), delta: log_n.powf(-0.25) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub horizon: u64,
    pub n0: usize,
    pub n1: usize,
    pub delta: f64,
    /// Positive weights over grid points; the prior `F_k` is their
    /// restriction to `∪_{i≥k} Θ_i`, renormalized. `None` means uniform.
    pub prior_weights: Option<Vec<f64>>,
}

impl StrategyConfig {
    pub fn with_default_schedules(horizon: u64, first_group_arms: usize) -> Self {
        let s = default_schedules(horizon, first_group_arms);
        Self { horizon, n0: s.n0, n1: s.n1, delta: s.delta, prior_weights: None }
    }

    pub fn validate(&self, grid: &ParameterGrid) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::InvalidConfig(m));
        if self.horizon < 3 {
            return bad(format!("horizon {} is below 3", self.horizon));
        }
        if self.n0 == 0 || self.n1 == 0 || self.n1 > self.n0 {
            return bad(format!("need 1 ≤ n1 ≤ n0, got n0 = {}, n1 = {}", self.n0, self.n1));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if let Some(w) = &self.prior_weights {
            if w.len() != grid.point_count() {
                return bad(format!("{} prior weights for {} points", w.len(), grid.point_count()));
            }
            if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad("prior weights must be positive and finite".into());
            }
        }
        Ok(())
    }

    pub fn log_horizon(&self) -> f64 {
        (self.horizon as f64).ln()
    }
}

/// Log transition and initial probabilities of every arm at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    offsets: Vec<usize>,
    arms: Vec<ArmId>,
    states: usize,
    points: usize,
    /// `log_kernel[arm][theta][x * states + y]`
    log_kernel: Vec<Vec<Vec<f64>>>,
    /// `log_initial[arm][theta][x]`
    log_initial: Vec<Vec<Vec<f64>>>,
}

impl LikelihoodModel {
    pub fn new(model: &Model) -> Self {
        let mut offsets = Vec::with_capacity(model.group_count());
        let mut total = 0;
        for g in &model.groups {
            offsets.push(total);
            total += g.len();
        }
        let states = model.space.size();
        let mut arms = Vec::new();
        let mut log_kernel = Vec::new();
        let mut log_initial = Vec::new();
        for arm in model.arms() {
            arms.push(arm.id);
            log_kernel.push(
                arm.kernels().iter().map(|k| k.rows().flat_map(|r| r.iter().map(|p| p.ln())).collect()).collect(),
            );
            log_initial.push(arm.initials().iter().map(|nu| nu.iter().map(|p| p.ln()).collect()).collect());
        }
        Self { offsets, arms, states, points: model.point_count(), log_kernel, log_initial }
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn point_count(&self) -> usize {
        self.points
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn arms(&self) -> &[ArmId] {
        &self.arms
    }

    /// Position of an arm in the flat arm order.
    pub fn index(&self, arm: ArmId) -> Option<usize> {
        let base = *self.offsets.get(arm.group)?;
        let idx = base + arm.arm;
        (self.arms.get(idx) == Some(&arm)).then_some(idx)
    }

    pub fn log_transition(&self, arm: usize, theta: usize, x: usize, y: usize) -> f64 {
        self.log_kernel[arm][theta][x * self.states + y]
    }

    pub fn log_initial(&self, arm: usize, theta: usize, x: usize) -> f64 {
        self.log_initial[arm][theta][x]
    }
}

/// Observation path of one arm with running log-likelihoods at every point.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmHistory {
    pub states: Vec<usize>,
    /// `log ν(X_0; θ)` per point.
    pub initial_loglik: Vec<f64>,
    /// `Σ_t log p(X_{t−1}, X_t; θ)` per point.
    pub transition_loglik: Vec<f64>,
}

impl ArmHistory {
    pub fn transitions(&self) -> usize {
        self.states.len() - 1
    }

    pub fn current(&self) -> usize {
        *self.states.last().expect("history holds the initial state")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histories {
    pub arms: Vec<ArmHistory>,
}

impl Histories {
    /// Starts every arm at its given initial state `X_ij0`.
    pub fn new(lik: &LikelihoodModel, initial_states: &[usize]) -> Result<Self, StrategyError> {
        if initial_states.len() != lik.arm_count() {
            return Err(StrategyError::InvalidConfig(format!(
                "{} initial states for {} arms",
                initial_states.len(),
                lik.arm_count()
            )));
        }
        let mut arms = Vec::with_capacity(lik.arm_count());
        for (a, &x) in initial_states.iter().enumerate() {
            if x >= lik.state_count() {
                return Err(StrategyError::UnknownState { arm: lik.arms[a], state: x });
            }
            arms.push(ArmHistory {
                states: vec![x],
                initial_loglik: (0..lik.point_count()).map(|t| lik.log_initial(a, t, x)).collect(),
                transition_loglik: vec![0.0; lik.point_count()],
            });
        }
        Ok(Self { arms })
    }

    pub fn record(&mut self, lik: &LikelihoodModel, arm: usize, next: usize) {
        let h = &mut self.arms[arm];
        let x = h.current();
        for (t, ll) in h.transition_loglik.iter_mut().enumerate() {
            *ll += lik.log_transition(arm, t, x, next);
        }
        h.states.push(next);
    }

    /// Transition log-likelihood per point over the arms of groups `0..=last_group`.
    pub fn transition_loglik(&self, lik: &LikelihoodModel, last_group: usize) -> Vec<f64> {
        self.sum_over(lik, last_group, |h, t| h.transition_loglik[t])
    }

    /// Full path log-likelihood (initial states included) per point.
    pub fn path_loglik(&self, lik: &LikelihoodModel, last_group: usize) -> Vec<f64> {
        self.sum_over(lik, last_group, |h, t| h.initial_loglik[t] + h.transition_loglik[t])
    }

    fn sum_over(&self, lik: &LikelihoodModel, last_group: usize, f: impl Fn(&ArmHistory, usize) -> f64) -> Vec<f64> {
        (0..lik.point_count())
            .map(|t| {
                lik.arms.iter().zip(&self.arms).filter(|(id, _)| id.group <= last_group).map(|(_, h)| f(h, t)).sum()
            })
            .collect()
    }
}

/// Maximum-likelihood point from the transitions of arms in groups
/// `0..=last_group`; ties go to the lowest id.
pub fn mle(histories: &Histories, lik: &LikelihoodModel, last_group: usize) -> Result<usize, StrategyError> {
    argmax_lowest(&histories.transition_loglik(lik, last_group))
}

fn argmax_lowest(values: &[f64]) -> Result<usize, StrategyError> {
    let mut best: Option<usize> = None;
    for (t, &v) in values.iter().enumerate() {
        if v > f64::NEG_INFINITY && best.is_none_or(|b| v > values[b]) {
            best = Some(t);
        }
    }
    best.ok_or(StrategyError::ZeroLikelihood)
}

/// Adjusted estimate and the estimated first optimal group `ℓ̂`.
pub fn adjusted_mle(grid: &ParameterGrid, theta_hat: usize, delta: f64) -> Result<(usize, usize), GridError> {
    let slice = grid.adjusted_slice(theta_hat, delta)?;
    Ok((crate::lower_bound::select_adjusted(grid, theta_hat, &slice.candidates), slice.ell))
}

/// `F_k` as `(point, weight)` pairs over `∪_{i≥k} Θ_i`.
pub fn prior_for_group(grid: &ParameterGrid, k: usize, weights: Option<&[f64]>) -> Vec<(usize, f64)> {
    let support: Vec<usize> = (0..grid.point_count()).filter(|&t| grid.group_index(t) >= k).collect();
    let raw: Vec<f64> = support.iter().map(|&t| weights.map_or(1.0, |w| w[t])).collect();
    let total: f64 = raw.iter().sum();
    support.into_iter().zip(raw).map(|(t, w)| (t, w / total)).collect()
}

/// `log U_k(λ)`: log of the prior-mixture likelihood over the likelihood at
/// `λ`, using the full paths of groups `0..=k`. `+∞` when `λ` gives the
/// data zero probability.
pub fn log_test_statistic(
    histories: &Histories,
    lik: &LikelihoodModel,
    k: usize,
    lambda: usize,
    prior: &[(usize, f64)],
) -> f64 {
    log_statistic_from(&histories.path_loglik(lik, k), lambda, prior)
}

pub fn test_statistic(
    histories: &Histories,
    lik: &LikelihoodModel,
    k: usize,
    lambda: usize,
    prior: &[(usize, f64)],
) -> f64 {
    log_test_statistic(histories, lik, k, lambda, prior).exp()
}

fn log_statistic_from(loglik: &[f64], lambda: usize, prior: &[(usize, f64)]) -> f64 {
    let denom = loglik[lambda];
    if denom == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let terms: Vec<f64> = prior.iter().map(|&(t, w)| w.ln() + loglik[t]).collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln() - denom
}

/// Everything the strategy knows mid-episode.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    pub stage: Stage,
    /// Current group (zero-based).
    pub k: usize,
    pub histories: Histories,
    pub counts: Vec<u64>,
    pub pending: VecDeque<ArmId>,
    /// Unrejected jobs of each group, as arm indices.
    pub unrejected: Vec<BTreeSet<usize>>,
    pub rejected_params: BTreeSet<usize>,
    pub theta_hat: Option<usize>,
    pub theta_hat_a: Option<usize>,
    pub ell_hat: Option<usize>,
    pub zhat: AllocationSolution,
    pub empirical_bad_set: Vec<usize>,
    pub pull_log: Vec<ArmId>,
    pub stage_log: Vec<Stage>,
    /// Arm most recently handed out and not yet observed.
    awaiting: Option<ArmId>,
}

pub struct PaperStrategy<'a> {
    grid: &'a ParameterGrid,
    lik: &'a LikelihoodModel,
    config: StrategyConfig,
    state: PolicyState,
}

impl<'a> PaperStrategy<'a> {
    pub fn new(
        grid: &'a ParameterGrid,
        lik: &'a LikelihoodModel,
        config: StrategyConfig,
        initial_states: &[usize],
    ) -> Result<Self, StrategyError> {
        config.validate(grid)?;
        if lik.point_count() != grid.point_count() {
            return Err(StrategyError::InvalidConfig("likelihood tables and grid disagree".into()));
        }
        let histories = Histories::new(lik, initial_states)?;
        let mut pending = VecDeque::new();
        for arm in grid.arms_in_group(0) {
            pending.extend(std::iter::repeat_n(arm, config.n0));
        }
        let state = PolicyState {
            stage: Stage::Estimation,
            k: 0,
            histories,
            counts: vec![0; lik.arm_count()],
            pending,
            unrejected: (0..grid.group_count()).map(|i| (0..grid.arms_per_group()[i]).collect()).collect(),
            rejected_params: BTreeSet::new(),
            theta_hat: None,
            theta_hat_a: None,
            ell_hat: None,
            zhat: AllocationSolution::empty(),
            empirical_bad_set: Vec::new(),
            pull_log: Vec::new(),
            stage_log: Vec::new(),
            awaiting: None,
        };
        Ok(Self { grid, lik, config, state })
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    pub fn into_state(self) -> PolicyState {
        self.state
    }

    /// The next arm to pull, or `Stop` once the budget is spent.
    pub fn next_action(&mut self) -> Result<Action, StrategyError> {
        if let Some(arm) = self.state.awaiting {
            return Err(StrategyError::AwaitingObservation(arm));
        }
        let used = self.state.pull_log.len() as u64;
        if used == self.config.horizon {
            return Ok(Action::Stop);
        }
        if used > self.config.horizon {
            return Err(StrategyError::BudgetExceeded(self.config.horizon));
        }
        while self.state.pending.is_empty() {
            self.advance()?;
        }
        let arm = self.state.pending.pop_front().expect("advance leaves pulls pending");
        self.state.awaiting = Some(arm);
        Ok(Action::Pull(arm))
    }

    /// Records the state the pulled arm moved to.
    pub fn observe(&mut self, arm: ArmId, next_state: usize) -> Result<(), StrategyError> {
        if self.state.awaiting != Some(arm) {
            return Err(StrategyError::UnexpectedObservation { expected: self.state.awaiting, got: arm });
        }
        let idx = self.lik.index(arm).ok_or(StrategyError::UnknownArm(arm))?;
        if next_state >= self.lik.state_count() {
            return Err(StrategyError::UnknownState { arm, state: next_state });
        }
        self.state.awaiting = None;
        self.state.histories.record(self.lik, idx, next_state);
        self.state.counts[idx] += 1;
        self.state.pull_log.push(arm);
        self.state.stage_log.push(self.state.stage);
        Ok(())
    }

    fn remaining(&self) -> u64 {
        self.config.horizon - self.state.pull_log.len() as u64
    }

    /// Moves the schedule forward once the pending queue has drained.
    fn advance(&mut self) -> Result<(), StrategyError> {
        match self.state.stage {
            Stage::Estimation => {
                let theta_hat = mle(&self.state.histories, self.lik, 0)?;
                let emp = empirical_lp(self.grid, theta_hat, self.config.delta, false)?;
                self.state.theta_hat = Some(theta_hat);
                self.state.theta_hat_a = Some(emp.theta_hat_a);
                self.state.ell_hat = Some(emp.ell);
                self.state.zhat = emp.solution;
                self.state.empirical_bad_set = emp.bad_set;
                self.enter_group(0)
            }
            Stage::Experimentation => self.start_testing(),
            Stage::Testing => {
                self.reject_after_round();
                if self.state.unrejected[self.state.k].is_empty() {
                    self.leave_group()
                } else {
                    self.plan_round()
                }
            }
            Stage::Final => {
                let arm = self.final_arm()?;
                let n = self.remaining() as usize;
                self.state.pending.extend(std::iter::repeat_n(arm, n));
                Ok(())
            }
        }
    }

    fn enter_group(&mut self, k: usize) -> Result<(), StrategyError> {
        self.state.k = k;
        self.state.stage = Stage::Experimentation;
        let ell_hat = self.state.ell_hat.expect("set after estimation");
        let skip = k > ell_hat || (k == ell_hat && self.state.empirical_bad_set.is_empty());
        if !skip {
            let log_n = self.config.log_horizon();
            for arm in self.grid.arms_in_group(k) {
                let n = (self.state.zhat.rate(arm) * log_n).floor() as usize;
                self.state.pending.extend(std::iter::repeat_n(arm, n));
            }
        }
        self.truncate_pending();
        Ok(())
    }

    fn start_testing(&mut self) -> Result<(), StrategyError> {
        self.state.stage = Stage::Testing;
        // jobs that are never first optimal have nothing left to reject
        self.reject_exhausted_jobs();
        if self.state.unrejected[self.state.k].is_empty() {
            return self.leave_group();
        }
        self.plan_round()
    }

    fn leave_group(&mut self) -> Result<(), StrategyError> {
        if self.state.k + 1 < self.grid.group_count() {
            self.enter_group(self.state.k + 1)
        } else {
            self.state.stage = Stage::Final;
            Ok(())
        }
    }

    fn plan_round(&mut self) -> Result<(), StrategyError> {
        let k = self.state.k;
        let theta_hat = mle(&self.state.histories, self.lik, k)?;
        self.state.theta_hat = Some(theta_hat);
        let jobs = &self.state.unrejected[k];
        if self.grid.group_index(theta_hat) == k {
            let favored = self.grid.optimal_set(theta_hat);
            for &j in jobs.iter().filter(|j| favored.contains(j)) {
                self.state.pending.extend(std::iter::repeat_n(ArmId::new(k, j), self.config.n1));
            }
            for &j in jobs.iter().filter(|j| !favored.contains(j)) {
                self.state.pending.push_back(ArmId::new(k, j));
            }
        } else {
            self.state.pending.extend(jobs.iter().map(|&j| ArmId::new(k, j)));
        }
        self.truncate_pending();
        Ok(())
    }

    fn reject_after_round(&mut self) {
        let k = self.state.k;
        let loglik = self.state.histories.path_loglik(self.lik, k);
        let prior = prior_for_group(self.grid, k, self.config.prior_weights.as_deref());
        let threshold = self.config.log_horizon();
        for lambda in self.grid.points_in_group(k) {
            if !self.state.rejected_params.contains(&lambda) && log_statistic_from(&loglik, lambda, &prior) >= threshold
            {
                self.state.rejected_params.insert(lambda);
            }
        }
        self.reject_exhausted_jobs();
    }

    fn reject_exhausted_jobs(&mut self) {
        let k = self.state.k;
        let grid = self.grid;
        let rejected = &self.state.rejected_params;
        self.state.unrejected[k]
            .retain(|&j| !grid.points_first_optimal(ArmId::new(k, j)).iter().all(|t| rejected.contains(t)));
    }

    fn final_arm(&mut self) -> Result<ArmId, StrategyError> {
        let k = self.grid.group_count() - 1;
        let theta_hat = mle(&self.state.histories, self.lik, k)?;
        self.state.theta_hat = Some(theta_hat);
        let means: Vec<f64> = self.grid.arms_in_group(k).map(|a| self.grid.mu(a, theta_hat)).collect();
        let j = argmax_lowest(&means)?;
        Ok(ArmId::new(k, j))
    }

    fn truncate_pending(&mut self) {
        let room = self.remaining() as usize;
        self.state.pending.truncate(room);
    }
}
