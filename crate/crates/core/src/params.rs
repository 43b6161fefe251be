//! The finite parameter grid and the sets derived from it: the partition by
//! first optimal group, optimal arm sets, and bad sets.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::markov::{kl_rate, mean_reward, ArmId, ModelError};
use crate::model::Model;

/// An information number at or below this is treated as zero.
pub const KL_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("mean reward of arm {arm} at point {point} is not finite")]
    NonFiniteReward { arm: ArmId, point: usize },
    #[error("information number of arm {arm} at ({theta}, {theta_prime}) is invalid: {value}")]
    InvalidInformation { arm: ArmId, theta: usize, theta_prime: usize, value: f64 },
    #[error("unknown parameter point {0}")]
    UnknownPoint(usize),
    #[error("neighbourhood radius must be positive, got {0}")]
    InvalidRadius(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    points: Vec<Vec<f64>>,
    arms_per_group: Vec<usize>,
    /// `mu[group][arm][point]`
    mu: Vec<Vec<Vec<f64>>>,
    /// `kl[group][arm][theta * n + theta_prime]`
    kl: Vec<Vec<Vec<f64>>>,
    group_of: Vec<usize>,
    optimal: Vec<Vec<usize>>,
    best: Vec<f64>,
}

/// The `δ/2`-ball slice used by the adjusted estimate: the earliest group
/// met by the ball, the largest optimal-set size there, and the points
/// attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedSlice {
    pub ell: usize,
    pub max_optimal: usize,
    pub candidates: Vec<usize>,
}

impl ParameterGrid {
    /// Precomputes mean rewards and information numbers from the model's
    /// kernels.
    pub fn from_model(model: &Model) -> Result<Self, GridError> {
        let n = model.point_count();
        let mut mu = Vec::with_capacity(model.group_count());
        let mut kl = Vec::with_capacity(model.group_count());
        for group in &model.groups {
            let mut gmu = Vec::with_capacity(group.len());
            let mut gkl = Vec::with_capacity(group.len());
            for arm in group {
                gmu.push((0..n).map(|t| mean_reward(&model.space, arm, t)).collect::<Result<Vec<_>, _>>()?);
                let mut table = vec![0.0; n * n];
                for t in 0..n {
                    for tp in 0..n {
                        table[t * n + tp] = kl_rate(arm, t, tp)?;
                    }
                }
                gkl.push(table);
            }
            mu.push(gmu);
            kl.push(gkl);
        }
        Self::from_tables(model.points.clone(), model.arms_per_group(), mu, kl)
    }

    /// Builds a grid from explicit tables: `mu[i][j][θ]` and
    /// `kl[i][j][θ * n + θ′]`.
    pub fn from_tables(
        points: Vec<Vec<f64>>,
        arms_per_group: Vec<usize>,
        mu: Vec<Vec<Vec<f64>>>,
        kl: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, GridError> {
        let n = points.len();
        if n == 0 {
            return Err(GridError::Shape("no parameter points".into()));
        }
        if arms_per_group.is_empty() || arms_per_group.contains(&0) {
            return Err(GridError::Shape("every group needs at least one arm".into()));
        }
        if mu.len() != arms_per_group.len() || kl.len() != arms_per_group.len() {
            return Err(GridError::Shape("tables must have one entry per group".into()));
        }
        for (i, &ji) in arms_per_group.iter().enumerate() {
            if mu[i].len() != ji || kl[i].len() != ji {
                return Err(GridError::Shape(format!("group {} must have {ji} arms", i + 1)));
            }
            for j in 0..ji {
                let arm = ArmId::new(i, j);
                if mu[i][j].len() != n || kl[i][j].len() != n * n {
                    return Err(GridError::Shape(format!("arm {arm} tables are incomplete")));
                }
                if let Some(point) = mu[i][j].iter().position(|m| !m.is_finite()) {
                    return Err(GridError::NonFiniteReward { arm, point });
                }
                for (idx, &value) in kl[i][j].iter().enumerate() {
                    if value.is_nan() || value < 0.0 {
                        return Err(GridError::InvalidInformation { arm, theta: idx / n, theta_prime: idx % n, value });
                    }
                }
            }
        }

        let mut group_of = Vec::with_capacity(n);
        let mut optimal = Vec::with_capacity(n);
        let mut best = Vec::with_capacity(n);
        for t in 0..n {
            let group_max: Vec<f64> =
                mu.iter().map(|g| g.iter().map(|a| a[t]).fold(f64::NEG_INFINITY, f64::max)).collect();
            let top = group_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ell = group_max.iter().position(|&m| m == top).expect("at least one group");
            group_of.push(ell);
            optimal.push((0..arms_per_group[ell]).filter(|&j| mu[ell][j][t] == top).collect());
            best.push(top);
        }
        Ok(Self { points, arms_per_group, mu, kl, group_of, optimal, best })
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.points[id]
    }

    pub fn group_count(&self) -> usize {
        self.arms_per_group.len()
    }

    pub fn arms_per_group(&self) -> &[usize] {
        &self.arms_per_group
    }

    pub fn arms_in_group(&self, group: usize) -> impl Iterator<Item = ArmId> {
        (0..self.arms_per_group[group]).map(move |j| ArmId::new(group, j))
    }

    /// Every arm, in precedence order.
    pub fn arms(&self) -> impl Iterator<Item = ArmId> + '_ {
        (0..self.group_count()).flat_map(move |i| self.arms_in_group(i))
    }

    pub fn mu(&self, arm: ArmId, theta: usize) -> f64 {
        self.mu[arm.group][arm.arm][theta]
    }

    pub fn kl(&self, arm: ArmId, theta: usize, theta_prime: usize) -> f64 {
        self.kl[arm.group][arm.arm][theta * self.points.len() + theta_prime]
    }

    /// `μ_i(θ) = max_j μ_ij(θ)`.
    pub fn group_mu(&self, group: usize, theta: usize) -> f64 {
        self.mu[group].iter().map(|a| a[theta]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `μ*(θ)`.
    pub fn best_mu(&self, theta: usize) -> f64 {
        self.best[theta]
    }

    /// The group holding the first optimal arm: the first group attaining
    /// the overall maximum mean.
    pub fn group_index(&self, theta: usize) -> usize {
        self.group_of[theta]
    }

    /// `J(θ)`: the arms of group `group_index(θ)` whose mean equals `μ*(θ)`
    /// exactly.
    pub fn optimal_set(&self, theta: usize) -> &[usize] {
        &self.optimal[theta]
    }

    /// `θ ∈ Θ_ij`.
    pub fn is_first_optimal(&self, theta: usize, arm: ArmId) -> bool {
        self.group_of[theta] == arm.group && self.optimal[theta].contains(&arm.arm)
    }

    /// `θ ∈ Θ_i*`: every optimal arm lies in `group`.
    pub fn all_optimal_in(&self, theta: usize, group: usize) -> bool {
        let own = self.group_mu(group, theta);
        (0..self.group_count()).all(|i| i == group || own > self.group_mu(i, theta))
    }

    /// `Θ_i`.
    pub fn points_in_group(&self, group: usize) -> Vec<usize> {
        (0..self.point_count()).filter(|&t| self.group_of[t] == group).collect()
    }

    /// `Θ_ij`.
    pub fn points_first_optimal(&self, arm: ArmId) -> Vec<usize> {
        (0..self.point_count()).filter(|&t| self.is_first_optimal(t, arm)).collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.points[a].iter().zip(&self.points[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// `B_ℓ(θ)`: points of `Θ_ℓ` whose optimal arms are disjoint from `J(θ)`
    /// and that no optimal arm of `θ` can tell apart from `θ`.
    pub fn bad_set(&self, theta: usize) -> Vec<usize> {
        let ell = self.group_of[theta];
        let own = &self.optimal[theta];
        (0..self.point_count())
            .filter(|&tp| {
                self.group_of[tp] == ell
                    && !self.optimal[tp].iter().any(|j| own.contains(j))
                    && own.iter().all(|&j| self.kl(ArmId::new(ell, j), theta, tp) <= KL_ZERO_TOL)
            })
            .collect()
    }

    /// Points strictly inside the open ball of radius `radius` around `center`.
    pub fn ball(&self, center: usize, radius: f64) -> Vec<usize> {
        (0..self.point_count()).filter(|&t| self.distance(center, t) < radius).collect()
    }

    /// The slice of `N_{δ/2}(θ̂)` from which the adjusted estimate is taken.
    pub fn adjusted_slice(&self, theta_hat: usize, delta: f64) -> Result<AdjustedSlice, GridError> {
        if !(delta > 0.0) {
            return Err(GridError::InvalidRadius(delta));
        }
        if theta_hat >= self.point_count() {
            return Err(GridError::UnknownPoint(theta_hat));
        }
        let ball = self.ball(theta_hat, delta / 2.0);
        // the center is always in its own ball
        let ell = ball.iter().map(|&t| self.group_of[t]).min().expect("ball contains its center");
        let slice: Vec<usize> = ball.into_iter().filter(|&t| self.group_of[t] == ell).collect();
        let max_optimal = slice.iter().map(|&t| self.optimal[t].len()).max().unwrap_or(0);
        let candidates = slice.into_iter().filter(|&t| self.optimal[t].len() == max_optimal).collect();
        Ok(AdjustedSlice { ell, max_optimal, candidates })
    }

    /// `B_ℓ(θ̂; δ)`: the union of the bad sets of every candidate in the
    /// adjusted slice.
    pub fn empirical_bad_set(&self, theta_hat: usize, delta: f64) -> Result<Vec<usize>, GridError> {
        let slice = self.adjusted_slice(theta_hat, delta)?;
        Ok(self.union_of_bad_sets(&slice.candidates))
    }

    pub fn union_of_bad_sets(&self, centers: &[usize]) -> Vec<usize> {
        let set: BTreeSet<usize> = centers.iter().flat_map(|&t| self.bad_set(t)).collect();
        set.into_iter().collect()
    }

    /// Scans the grid for violations of the non-redundancy and positive
    /// information conditions.
    pub fn validate_assumptions(&self) -> AssumptionReport {
        let n = self.point_count();
        let groups = self.group_count();
        let redundant_groups = (0..groups).filter(|&i| !(0..n).any(|t| self.all_optimal_in(t, i))).collect();

        let mut uninformative_pairs = Vec::new();
        for t in 0..n {
            for tp in 0..n {
                if t == tp {
                    continue;
                }
                let info: f64 = self.arms_in_group(0).map(|a| self.kl(a, t, tp)).sum();
                if info <= KL_ZERO_TOL {
                    uninformative_pairs.push((t, tp));
                }
            }
        }

        let mut blocked_transitions = Vec::new();
        for i in 0..groups.saturating_sub(1) {
            for arm in self.arms_in_group(i) {
                let targets = self.points_first_optimal(arm);
                for t in (0..n).filter(|&t| self.group_of[t] > i) {
                    if let Some(&tp) = targets.iter().find(|&&tp| self.kl(arm, t, tp) <= KL_ZERO_TOL) {
                        blocked_transitions.push(TransitionWitness { arm, theta: t, theta_prime: tp });
                    }
                }
            }
        }
        AssumptionReport { redundant_groups, uninformative_pairs, blocked_transitions }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionWitness {
    pub arm: ArmId,
    pub theta: usize,
    pub theta_prime: usize,
}

/// Pass/fail with witnesses for each grid-level assumption.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    /// Groups `i` with `Θ_i* = ∅`.
    pub redundant_groups: Vec<usize>,
    /// Pairs `(θ, θ′)`, `θ ≠ θ′`, that the first group cannot distinguish.
    pub uninformative_pairs: Vec<(usize, usize)>,
    /// `(ij, θ, θ′)` with `θ` in a later group, `θ′ ∈ Θ_ij` and zero
    /// information on arm `ij`.
    pub blocked_transitions: Vec<TransitionWitness>,
}

impl AssumptionReport {
    pub fn no_redundant_group(&self) -> bool {
        self.redundant_groups.is_empty()
    }

    pub fn first_group_informative(&self) -> bool {
        self.uninformative_pairs.is_empty()
    }

    pub fn groups_separable(&self) -> bool {
        self.blocked_transitions.is_empty()
    }

    pub fn holds(&self) -> bool {
        self.no_redundant_group() && self.first_group_informative() && self.groups_separable()
    }
}
