//! The regret lower-bound program and its empirical counterpart.
//!
//! For `θ ∈ Θ_ℓ` the allocation rates `z_ij` (observations per `log N`) of
//! every arm in groups before `ℓ`, and of the non-optimal arms of group `ℓ`,
//! minimize the regret rate subject to one information constraint per
//! parameter point that must be ruled out: every point of each earlier
//! group's set `Θ_m` (using arms of groups `1..=m`), and every point of the
//! bad set (using all allocation variables).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::markov::ArmId;
use crate::params::{GridError, ParameterGrid};
use crate::simplex::{solve_covering, SimplexError};

/// Feasibility and objective tolerance.
pub const LP_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowerBoundError {
    #[error("constraint for {0} has no information on any allocation variable")]
    ZeroInformation(ConstraintSource),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("solution fails certification: {0}")]
    Certificate(String),
}

/// Which parameter point a constraint rules out, and why.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSource {
    /// `θ′ ∈ Θ_m` for an earlier group `m`.
    Stage { group: usize, point: usize },
    /// `θ′` in the (empirical) bad set.
    BadSet { point: usize },
}

impl ConstraintSource {
    pub fn point(&self) -> usize {
        match *self {
            Self::Stage { point, .. } | Self::BadSet { point } => point,
        }
    }
}

impl std::fmt::Display for ConstraintSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Stage { group, point } => write!(f, "point {point} of group {}", group + 1),
            Self::BadSet { point } => write!(f, "bad-set point {point}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub source: ConstraintSource,
    /// One coefficient per LP variable, `I_ij(θ, θ′)` or 0.
    pub coefficients: Vec<f64>,
}

/// A constraint removed because one of its coefficients was infinite; any
/// positive rate on `infinite_on` satisfies it.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedConstraint {
    pub source: ConstraintSource,
    pub infinite_on: Vec<ArmId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationLP {
    pub theta: usize,
    pub ell: usize,
    pub variables: Vec<ArmId>,
    /// `μ*(θ) − μ_ij(θ)` per variable.
    pub objective: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
    pub dropped: Vec<DroppedConstraint>,
}

impl AllocationLP {
    /// Removes constraints with no positive coefficient, returning them.
    pub fn drop_uninformative(&mut self) -> Vec<ConstraintSource> {
        let (keep, gone): (Vec<_>, Vec<_>) =
            self.constraints.drain(..).partition(|c| c.coefficients.iter().any(|&a| a > 0.0));
        self.constraints = keep;
        gone.into_iter().map(|c| c.source).collect()
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, z)| c * z).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSolution {
    /// Rates for every LP variable (zero entries included).
    pub z: BTreeMap<ArmId, f64>,
    pub value: f64,
}

impl AllocationSolution {
    pub fn empty() -> Self {
        Self { z: BTreeMap::new(), value: 0.0 }
    }

    /// Rate of an arm; arms that are not LP variables get 0.
    pub fn rate(&self, arm: ArmId) -> f64 {
        self.z.get(&arm).copied().unwrap_or(0.0)
    }
}

pub fn build_lp(grid: &ParameterGrid, theta: usize, bad_set_points: &[usize]) -> AllocationLP {
    let ell = grid.group_index(theta);
    let best = grid.best_mu(theta);
    let optimal = grid.optimal_set(theta);
    let variables: Vec<ArmId> = (0..ell)
        .flat_map(|i| grid.arms_in_group(i))
        .chain(grid.arms_in_group(ell).filter(|a| !optimal.contains(&a.arm)))
        .collect();
    let objective = variables.iter().map(|&a| best - grid.mu(a, theta)).collect();

    let mut constraints = Vec::new();
    let mut dropped = Vec::new();
    let mut push = |source: ConstraintSource, max_group: usize| {
        let tp = source.point();
        let coefficients: Vec<f64> =
            variables.iter().map(|&a| if a.group <= max_group { grid.kl(a, theta, tp) } else { 0.0 }).collect();
        let infinite_on: Vec<ArmId> =
            variables.iter().zip(&coefficients).filter(|(_, c)| c.is_infinite()).map(|(&a, _)| a).collect();
        if infinite_on.is_empty() {
            constraints.push(LpConstraint { source, coefficients });
        } else {
            dropped.push(DroppedConstraint { source, infinite_on });
        }
    };
    for m in 0..ell {
        for tp in grid.points_in_group(m) {
            push(ConstraintSource::Stage { group: m, point: tp }, m);
        }
    }
    for &tp in bad_set_points {
        push(ConstraintSource::BadSet { point: tp }, ell);
    }
    AllocationLP { theta, ell, variables, objective, constraints, dropped }
}

/// Solves the program and certifies feasibility and the objective value.
pub fn solve_lp(lp: &AllocationLP) -> Result<AllocationSolution, LowerBoundError> {
    if let Some(c) = lp.constraints.iter().find(|c| c.coefficients.iter().all(|&a| a <= 0.0)) {
        return Err(LowerBoundError::ZeroInformation(c.source));
    }
    let rows: Vec<Vec<f64>> = lp.constraints.iter().map(|c| c.coefficients.clone()).collect();
    let sol = solve_covering(&lp.objective, &rows)?;
    for c in &lp.constraints {
        let lhs: f64 = c.coefficients.iter().zip(&sol.z).map(|(a, z)| a * z).sum();
        if lhs < 1.0 - LP_TOL {
            return Err(LowerBoundError::Certificate(format!("{} covered only {lhs}", c.source)));
        }
    }
    let value = lp.objective_value(&sol.z);
    if (value - sol.value).abs() > LP_TOL {
        return Err(LowerBoundError::Certificate(format!("objective {value} vs {}", sol.value)));
    }
    Ok(AllocationSolution { z: lp.variables.iter().copied().zip(sol.z).collect(), value })
}

/// `z(θ, ℓ)` with the bad set of `θ` itself.
pub fn lower_bound(grid: &ParameterGrid, theta: usize) -> Result<AllocationSolution, LowerBoundError> {
    solve_lp(&build_lp(grid, theta, &grid.bad_set(theta)))
}

/// The empirical program solved after the estimation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalAllocation {
    pub theta_hat: usize,
    pub theta_hat_a: usize,
    pub ell: usize,
    pub bad_set: Vec<usize>,
    pub lp: AllocationLP,
    /// Constraints removed because the adjusted estimate's arms carry no
    /// information on them.
    pub uninformative: Vec<ConstraintSource>,
    pub solution: AllocationSolution,
}

/// Centers the program at the adjusted estimate and uses the empirical bad
/// set `B_ℓ(θ̂; δ)` for the last block of constraints.
///
/// With `strict` set, a constraint without information is an error, as for
/// [`lower_bound`]; otherwise it is dropped and listed in `uninformative`.
pub fn empirical_lp(
    grid: &ParameterGrid,
    theta_hat: usize,
    delta: f64,
    strict: bool,
) -> Result<EmpiricalAllocation, LowerBoundError> {
    let slice = grid.adjusted_slice(theta_hat, delta)?;
    let theta_hat_a = select_adjusted(grid, theta_hat, &slice.candidates);
    let bad_set = grid.union_of_bad_sets(&slice.candidates);
    let mut lp = build_lp(grid, theta_hat_a, &bad_set);
    let uninformative = if strict { Vec::new() } else { lp.drop_uninformative() };
    let solution = solve_lp(&lp)?;
    Ok(EmpiricalAllocation { theta_hat, theta_hat_a, ell: slice.ell, bad_set, lp, uninformative, solution })
}

/// Picks the adjusted estimate from the candidate set: the estimate itself
/// when it qualifies, otherwise the nearest candidate, lowest id on ties.
pub fn select_adjusted(grid: &ParameterGrid, theta_hat: usize, candidates: &[usize]) -> usize {
    if candidates.contains(&theta_hat) {
        return theta_hat;
    }
    let key = |c: usize| (grid.distance(theta_hat, c), c);
    *candidates
        .iter()
        .min_by(|&&a, &&b| key(a).partial_cmp(&key(b)).expect("finite distances"))
        .expect("candidate set is never empty")
}
