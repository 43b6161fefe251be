//! Finite-state Markov arm models.
//!
//! Every arm is a family of row-stochastic kernels indexed by parameter-point
//! id, all on one shared [`StateSpace`]. The reward of an observation is
//! `g(x)` for the state `x` the chain lands in.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for row sums and stationarity residuals.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state space must have at least one state")]
    EmptyStateSpace,
    #[error("reward for state {state} is not finite")]
    NonFiniteReward { state: usize },
    #[error("kernel row {row} is invalid: {reason}")]
    InvalidKernel { row: usize, reason: String },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("kernel is not irreducible (state {unreachable} not mutually reachable with state 0)")]
    NotIrreducible { unreachable: usize },
    #[error("kernel is periodic with period {period}")]
    Periodic { period: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown parameter point {0}")]
    UnknownPoint(usize),
    #[error("arm has no atom (G, alpha, phi) declared")]
    MissingAtom,
    #[error("arm has no drift function declared")]
    MissingDrift,
    #[error("invalid atom: {0}")]
    InvalidAtom(String),
    #[error("invalid drift: {0}")]
    InvalidDrift(String),
    #[error("initial distributions do not share a common support")]
    SupportMismatch,
    #[error("linear system is singular")]
    Singular,
}

/// States `0..size` together with the reward function `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    rewards: Vec<f64>,
}

impl StateSpace {
    pub fn new(rewards: Vec<f64>) -> Result<Self, ModelError> {
        if rewards.is_empty() {
            return Err(ModelError::EmptyStateSpace);
        }
        if let Some(state) = rewards.iter().position(|r| !r.is_finite()) {
            return Err(ModelError::NonFiniteReward { state });
        }
        Ok(Self { rewards })
    }

    pub fn size(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, state: usize) -> f64 {
        self.rewards[state]
    }
}

/// Row-stochastic transition matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    probs: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let size = rows.len();
        if size == 0 {
            return Err(ModelError::EmptyStateSpace);
        }
        let mut probs = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(ModelError::InvalidKernel {
                    row: i,
                    reason: format!("expected {size} entries, found {}", row.len()),
                });
            }
            check_probability_row(&row).map_err(|reason| ModelError::InvalidKernel { row: i, reason })?;
            probs.extend(row);
        }
        Ok(Self { size, probs })
    }

    /// Kernel whose rows all equal `row`: the observations are i.i.d.
    pub fn iid(row: Vec<f64>) -> Result<Self, ModelError> {
        let n = row.len();
        Self::new(vec![row; n])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.probs[x * self.size..(x + 1) * self.size]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.size + y]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.size)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// One step of the chain applied to a row distribution: `dist · P`.
    pub fn push_forward(&self, dist: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for (x, &px) in dist.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(x)) {
                *o += px * p;
            }
        }
        out
    }

    /// `(P f)(x) = Σ_y P(x, y) f(y)`.
    pub fn apply_fn(&self, f: &[f64]) -> Vec<f64> {
        self.rows().map(|row| row.iter().zip(f).map(|(p, v)| p * v).sum()).collect()
    }

    /// Checks strong connectivity of the positive-entry graph.
    pub fn check_irreducible(&self) -> Result<(), ModelError> {
        let forward = self.reachable_from_zero(false);
        let backward = self.reachable_from_zero(true);
        match (0..self.size).find(|&s| !forward[s] || !backward[s]) {
            Some(unreachable) => Err(ModelError::NotIrreducible { unreachable }),
            None => Ok(()),
        }
    }

    fn reachable_from_zero(&self, reversed: bool) -> Vec<bool> {
        let mut seen = vec![false; self.size];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..self.size {
                let p = if reversed { self.get(v, u) } else { self.get(u, v) };
                if p > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Period of state 0: gcd of the lengths of cycles through it, computed
    /// from BFS levels as gcd over edges (u, v) of `level(u) + 1 - level(v)`.
    /// Meaningful for irreducible kernels.
    pub fn period(&self) -> usize {
        let mut level = vec![usize::MAX; self.size];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..self.size {
                if self.get(u, v) > 0.0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let mut g = 0usize;
        for u in 0..self.size {
            if level[u] == usize::MAX {
                continue;
            }
            for v in 0..self.size {
                if self.get(u, v) > 0.0 && level[v] != usize::MAX {
                    let diff = (level[u] + 1).abs_diff(level[v]);
                    g = gcd(g, diff);
                }
            }
        }
        g
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn check_probability_row(row: &[f64]) -> Result<(), String> {
    if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(format!("entry {p} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

/// Validates a probability vector of the given length.
pub fn check_distribution(dist: &[f64], size: usize) -> Result<(), ModelError> {
    if dist.len() != size {
        return Err(ModelError::InvalidDistribution(format!("expected {size} entries, found {}", dist.len())));
    }
    check_probability_row(dist).map_err(ModelError::InvalidDistribution)
}

/// Minorization data `(G, α, φ)`: `P(x, ·) ≥ α φ(·)` for every `x ∈ G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    states: Vec<usize>,
    member: Vec<bool>,
    alpha: f64,
    phi: Vec<f64>,
}

impl Atom {
    /// `phi` is given over the listed `states`, in the same order.
    pub fn new(states: Vec<usize>, alpha: f64, phi: Vec<f64>, size: usize) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::InvalidAtom("G must be nonempty".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ModelError::InvalidAtom(format!("alpha = {alpha} outside (0, 1]")));
        }
        if phi.len() != states.len() {
            return Err(ModelError::InvalidAtom("phi must have one entry per state of G".into()));
        }
        let mut member = vec![false; size];
        let mut full_phi = vec![0.0; size];
        for (&s, &w) in states.iter().zip(&phi) {
            if s >= size {
                return Err(ModelError::InvalidAtom(format!("state {s} out of range")));
            }
            if member[s] {
                return Err(ModelError::InvalidAtom(format!("state {s} listed twice")));
            }
            member[s] = true;
            full_phi[s] = w;
        }
        check_probability_row(&full_phi).map_err(ModelError::InvalidAtom)?;
        Ok(Self { states, member, alpha, phi: full_phi })
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn contains(&self, x: usize) -> bool {
        self.member[x]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// φ over the full state space (zero off G).
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// φ restricted to the states of G, in listed order.
    pub fn phi_on_states(&self) -> Vec<f64> {
        self.states.iter().map(|&s| self.phi[s]).collect()
    }
}

/// Geometric drift data `(V, b̄, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub v: Vec<f64>,
    pub b_bar: f64,
    pub b: f64,
}

impl Drift {
    pub fn new(v: Vec<f64>, b_bar: f64, b: f64, size: usize) -> Result<Self, ModelError> {
        if v.len() != size {
            return Err(ModelError::InvalidDrift(format!("V must have {size} entries")));
        }
        if v.iter().any(|&x| !(x >= 1.0) || !x.is_finite()) {
            return Err(ModelError::InvalidDrift("V must be finite and >= 1".into()));
        }
        if !(b_bar > 0.0 && b_bar < 1.0) {
            return Err(ModelError::InvalidDrift(format!("b_bar = {b_bar} outside (0, 1)")));
        }
        if !(b > 0.0) {
            return Err(ModelError::InvalidDrift(format!("b = {b} must be positive")));
        }
        Ok(Self { v, b_bar, b })
    }
}

/// Arm identifier; both indices are zero-based. Displays one-based as `i.j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArmId {
    pub group: usize,
    pub arm: usize,
}

impl ArmId {
    pub fn new(group: usize, arm: usize) -> Self {
        Self { group, arm }
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.group + 1, self.arm + 1)
    }
}

/// One arm `ij`: a kernel and initial distribution per parameter point, plus
/// optional atom and drift data.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    pub id: ArmId,
    kernels: Vec<Kernel>,
    initial: Vec<Vec<f64>>,
    atom: Option<Atom>,
    drift: Option<Drift>,
}

impl ArmSpec {
    pub fn new(
        id: ArmId,
        kernels: Vec<Kernel>,
        initial: Vec<Vec<f64>>,
        atom: Option<Atom>,
        drift: Option<Drift>,
    ) -> Result<Self, ModelError> {
        let Some(first) = kernels.first() else {
            return Err(ModelError::ShapeMismatch(format!("arm {id} has no kernels")));
        };
        let size = first.size();
        if kernels.iter().any(|k| k.size() != size) {
            return Err(ModelError::ShapeMismatch(format!("arm {id} kernels differ in size")));
        }
        if initial.len() != kernels.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "arm {id} has {} kernels but {} initial distributions",
                kernels.len(),
                initial.len()
            )));
        }
        for nu in &initial {
            check_distribution(nu, size)?;
        }
        let support = |nu: &Vec<f64>| nu.iter().map(|&p| p > 0.0).collect::<Vec<_>>();
        let base = support(&initial[0]);
        if initial.iter().any(|nu| support(nu) != base) {
            return Err(ModelError::SupportMismatch);
        }
        if let Some(a) = &atom {
            if a.member.len() != size {
                return Err(ModelError::InvalidAtom("atom built for a different state space".into()));
            }
        }
        if let Some(d) = &drift {
            if d.v.len() != size {
                return Err(ModelError::InvalidDrift("drift built for a different state space".into()));
            }
        }
        Ok(Self { id, kernels, initial, atom, drift })
    }

    pub fn state_count(&self) -> usize {
        self.kernels[0].size()
    }

    pub fn point_count(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernel(&self, theta: usize) -> Result<&Kernel, ModelError> {
        self.kernels.get(theta).ok_or(ModelError::UnknownPoint(theta))
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn initial(&self, theta: usize) -> Result<&[f64], ModelError> {
        self.initial.get(theta).map(Vec::as_slice).ok_or(ModelError::UnknownPoint(theta))
    }

    pub fn initials(&self) -> &[Vec<f64>] {
        &self.initial
    }

    pub fn atom(&self) -> Option<&Atom> {
        self.atom.as_ref()
    }

    pub fn drift(&self) -> Option<&Drift> {
        self.drift.as_ref()
    }
}

/// Stationary law `π` with `πP = π`, `Σπ = 1`.
///
/// Requires an irreducible aperiodic kernel. Solved directly (one equation of
/// `π(P − I) = 0` swapped for the normalization) with one refinement step.
pub fn stationary_distribution(kernel: &Kernel) -> Result<Vec<f64>, ModelError> {
    kernel.check_irreducible()?;
    let period = kernel.period();
    if period != 1 {
        return Err(ModelError::Periodic { period });
    }
    let n = kernel.size();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            a[(y, x)] = kernel.get(x, y) - if x == y { 1.0 } else { 0.0 };
        }
    }
    for x in 0..n {
        a[(n - 1, x)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut pi = lu.solve(&b).ok_or(ModelError::Singular)?;
    let residual = &b - &a * &pi;
    if let Some(corr) = lu.solve(&residual) {
        pi += corr;
    }
    let mut pi: Vec<f64> = pi.iter().copied().collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

/// `μ(θ) = Σ_x g(x) π(x; θ)`.
pub fn mean_reward(space: &StateSpace, arm: &ArmSpec, theta: usize) -> Result<f64, ModelError> {
    let pi = stationary_distribution(arm.kernel(theta)?)?;
    Ok(pi.iter().zip(space.rewards()).map(|(p, g)| p * g).sum())
}

/// Kullback–Leibler information rate per transition,
/// `Σ_x π(x;θ) Σ_y p(x,y;θ) log[p(x,y;θ)/p(x,y;θ′)]`.
///
/// Returns `+∞` when some transition possible under `θ` is impossible under
/// `θ′`. Terms with `p(x,y;θ) = 0` contribute nothing.
pub fn kl_rate(arm: &ArmSpec, theta: usize, theta_prime: usize) -> Result<f64, ModelError> {
    let p = arm.kernel(theta)?;
    let q = arm.kernel(theta_prime)?;
    if theta == theta_prime {
        return Ok(0.0);
    }
    let pi = stationary_distribution(p)?;
    let mut total = 0.0;
    for (x, &px) in pi.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let mut row_kl = 0.0;
        for (&a, &b) in p.row(x).iter().zip(q.row(x)) {
            if a == 0.0 {
                continue;
            }
            if b == 0.0 {
                return Ok(f64::INFINITY);
            }
            row_kl += a * (a / b).ln();
        }
        total += px * row_kl;
    }
    // Rounding can leave a tiny negative value for near-identical kernels.
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationReport {
    pub holds: bool,
    /// `(x, y)` pairs with `x ∈ G` and `P(x, y) < α φ(y)`.
    pub violations: Vec<(usize, usize)>,
}

pub fn check_minorization(arm: &ArmSpec, theta: usize) -> Result<MinorizationReport, ModelError> {
    let atom = arm.atom().ok_or(ModelError::MissingAtom)?;
    let kernel = arm.kernel(theta)?;
    let mut violations = Vec::new();
    for &x in atom.states() {
        for y in 0..kernel.size() {
            if kernel.get(x, y) < atom.alpha() * atom.phi()[y] - STOCHASTIC_TOL {
                violations.push((x, y));
            }
        }
    }
    Ok(MinorizationReport { holds: violations.is_empty(), violations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub holds: bool,
    /// States where `(PV)(x) > (1 − b̄) V(x) + b 1_G(x)`.
    pub violations: Vec<usize>,
}

/// Geometric drift check. `sup |g|/V` and `sup_G V` are finite automatically
/// on a finite state space, so only the drift inequality is tested.
pub fn check_drift(arm: &ArmSpec, theta: usize) -> Result<DriftReport, ModelError> {
    let drift = arm.drift().ok_or(ModelError::MissingDrift)?;
    let atom = arm.atom().ok_or(ModelError::MissingAtom)?;
    let kernel = arm.kernel(theta)?;
    let pv = kernel.apply_fn(&drift.v);
    let violations: Vec<usize> = (0..kernel.size())
        .filter(|&x| {
            let bound = (1.0 - drift.b_bar) * drift.v[x] + if atom.contains(x) { drift.b } else { 0.0 };
            pv[x] > bound + STOCHASTIC_TOL
        })
        .collect();
    Ok(DriftReport { holds: violations.is_empty(), violations })
}

/// Inverse-CDF draw: the first index whose cumulative sum strictly exceeds `u`.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn sample_transition<R: Rng + ?Sized>(kernel: &Kernel, state: usize, rng: &mut R) -> usize {
    sample_index(kernel.row(state), rng.gen::<f64>())
}
