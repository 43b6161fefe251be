//! A complete bandit instance: shared state space, parameter points and the
//! arm groups ordered by precedence.

use crate::markov::{check_drift, check_minorization, stationary_distribution, ArmId, ArmSpec, ModelError, StateSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub space: StateSpace,
    /// Parameter points; a point's id is its position.
    pub points: Vec<Vec<f64>>,
    /// `groups[i][j]` is arm `ij` (zero-based).
    pub groups: Vec<Vec<ArmSpec>>,
    pub switching_cost: Option<f64>,
}

impl Model {
    pub fn new(
        space: StateSpace,
        points: Vec<Vec<f64>>,
        groups: Vec<Vec<ArmSpec>>,
        switching_cost: Option<f64>,
    ) -> Result<Self, ModelError> {
        let Some(first) = points.first() else {
            return Err(ModelError::ShapeMismatch("parameter grid is empty".into()));
        };
        let dim = first.len();
        if dim == 0 || points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return Err(ModelError::ShapeMismatch(
                "parameter points must be finite vectors of one common dimension".into(),
            ));
        }
        if groups.is_empty() || groups.iter().any(Vec::is_empty) {
            return Err(ModelError::ShapeMismatch("every group needs at least one arm".into()));
        }
        for (i, group) in groups.iter().enumerate() {
            for (j, arm) in group.iter().enumerate() {
                if arm.id != ArmId::new(i, j) {
                    return Err(ModelError::ShapeMismatch(format!(
                        "arm declared as {} sits at position {}",
                        arm.id,
                        ArmId::new(i, j)
                    )));
                }
                if arm.state_count() != space.size() {
                    return Err(ModelError::ShapeMismatch(format!(
                        "arm {} has {} states, state space has {}",
                        arm.id,
                        arm.state_count(),
                        space.size()
                    )));
                }
                if arm.point_count() != points.len() {
                    return Err(ModelError::ShapeMismatch(format!(
                        "arm {} has {} kernels for {} parameter points",
                        arm.id,
                        arm.point_count(),
                        points.len()
                    )));
                }
            }
        }
        if let Some(a) = switching_cost {
            if !(a > 0.0 && a.is_finite()) {
                return Err(ModelError::ShapeMismatch(format!("switching cost {a} must be positive")));
            }
        }
        Ok(Self { space, points, groups, switching_cost })
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn arms_per_group(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn arm(&self, id: ArmId) -> &ArmSpec {
        &self.groups[id.group][id.arm]
    }

    pub fn arms(&self) -> impl Iterator<Item = &ArmSpec> {
        self.groups.iter().flatten()
    }

    pub fn arm_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Per-arm, per-point checks of the chain regularity conditions.
    pub fn chain_report(&self) -> ChainReport {
        let mut issues = Vec::new();
        for arm in self.arms() {
            for theta in 0..self.point_count() {
                let kernel = &arm.kernels()[theta];
                if let Err(e) = stationary_distribution(kernel) {
                    issues.push(ChainIssue { arm: arm.id, point: theta, problem: e.to_string() });
                }
                if arm.atom().is_some() {
                    match check_minorization(arm, theta) {
                        Ok(r) if !r.holds => issues.push(ChainIssue {
                            arm: arm.id,
                            point: theta,
                            problem: format!("minorization fails at (x, y) = {:?}", r.violations),
                        }),
                        Err(e) => issues.push(ChainIssue { arm: arm.id, point: theta, problem: e.to_string() }),
                        Ok(_) => {}
                    }
                }
                if arm.drift().is_some() {
                    match check_drift(arm, theta) {
                        Ok(r) if !r.holds => issues.push(ChainIssue {
                            arm: arm.id,
                            point: theta,
                            problem: format!("drift inequality fails at states {:?}", r.violations),
                        }),
                        Err(e) => issues.push(ChainIssue { arm: arm.id, point: theta, problem: e.to_string() }),
                        Ok(_) => {}
                    }
                }
            }
        }
        ChainReport { issues }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainIssue {
    pub arm: ArmId,
    pub point: usize,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainReport {
    pub issues: Vec<ChainIssue>,
}

impl ChainReport {
    pub fn holds(&self) -> bool {
        self.issues.is_empty()
    }
}
