//! Markov random walks `S_n = ξ_1 + … + ξ_n` driven by a finite chain, the
//! split-chain regeneration construction, the correction function `γ`, and
//! exact and Monte Carlo checks of Wald's equation
//! `E S_τ = μ E τ − E γ(X_τ) + E γ(X_0)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::markov::{sample_index, stationary_distribution, ArmSpec, Atom, Drift, Kernel, ModelError, STOCHASTIC_TOL};
use crate::seeds::derive_seed;

/// Safety cap on the length of one simulated path.
pub const MAX_PATH_STEPS: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegenerationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("residual kernel is negative at ({x}, {y}); minorization fails")]
    InvalidSplit { x: usize, y: usize },
    #[error("increment matrix does not match the kernel: {0}")]
    BadIncrement(String),
    #[error("increment is infinite at ({x}, {y})")]
    InfiniteIncrement { x: usize, y: usize },
    #[error("I − P̃ is singular")]
    SingularSystem,
    #[error("first-passage rule needs a positive drift, got μ = {0}")]
    NonPositiveDrift(f64),
    #[error("path exceeded {MAX_PATH_STEPS} steps")]
    PathTooLong,
    #[error("the walk has no drift data")]
    MissingDrift,
    #[error("start distribution is invalid: {0}")]
    BadStart(String),
}

/// A finite chain with transition increments and a minorizing atom.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovWalk {
    kernel: Kernel,
    increment: Vec<Vec<f64>>,
    mu: f64,
    atom: Atom,
    drift: Option<Drift>,
    /// Rows of `(P(x,·) − αφ)/(1 − α)` for `x ∈ G` with `α < 1`.
    residual: Vec<Option<Vec<f64>>>,
}

impl MarkovWalk {
    /// The log-likelihood-ratio walk of one arm: the chain runs under `θ_0`
    /// and `ξ(x, y) = log[p(x,y;θ_0)/p(x,y;θ_q)]`.
    pub fn log_likelihood_ratio(arm: &ArmSpec, theta0: usize, thetaq: usize) -> Result<Self, RegenerationError> {
        let p = arm.kernel(theta0)?;
        let q = arm.kernel(thetaq)?;
        let n = p.size();
        let mut increment = vec![vec![0.0; n]; n];
        for x in 0..n {
            for y in 0..n {
                let (a, b) = (p.get(x, y), q.get(x, y));
                if a == 0.0 {
                    continue;
                }
                if b == 0.0 {
                    return Err(RegenerationError::InfiniteIncrement { x, y });
                }
                increment[x][y] = (a / b).ln();
            }
        }
        let atom = arm.atom().cloned().ok_or(ModelError::MissingAtom)?;
        Self::new(p.clone(), increment, atom, arm.drift().cloned())
    }

    /// A walk with arbitrary finite increments; `μ` is their stationary mean.
    pub fn new(
        kernel: Kernel,
        increment: Vec<Vec<f64>>,
        atom: Atom,
        drift: Option<Drift>,
    ) -> Result<Self, RegenerationError> {
        let n = kernel.size();
        if increment.len() != n || increment.iter().any(|r| r.len() != n) {
            return Err(RegenerationError::BadIncrement(format!("expected {n}×{n}")));
        }
        if let Some((x, y)) = find_2d(&increment, |v| !v.is_finite()) {
            return Err(RegenerationError::InfiniteIncrement { x, y });
        }
        if atom.phi().len() != n {
            return Err(ModelError::InvalidAtom("atom built for a different state space".into()).into());
        }
        let mut residual = vec![None; n];
        for &x in atom.states() {
            let row: Vec<f64> = (0..n).map(|y| kernel.get(x, y) - atom.alpha() * atom.phi()[y]).collect();
            if let Some(y) = row.iter().position(|&r| r < -STOCHASTIC_TOL) {
                return Err(RegenerationError::InvalidSplit { x, y });
            }
            if atom.alpha() < 1.0 {
                let scale = 1.0 - atom.alpha();
                residual[x] = Some(row.iter().map(|r| r.max(0.0) / scale).collect());
            }
        }
        let pi = stationary_distribution(&kernel)?;
        let mu = (0..n).map(|x| pi[x] * row_mean(&kernel, &increment, x)).sum();
        Ok(Self { kernel, increment, mu, atom, drift, residual })
    }

    /// The same walk with every increment multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self, RegenerationError> {
        let inc = self.increment.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        Self::new(self.kernel.clone(), inc, self.atom.clone(), self.drift.clone())
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn increment(&self, x: usize, y: usize) -> f64 {
        self.increment[x][y]
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn atom(&self) -> &Atom {
        &self.atom
    }

    pub fn drift(&self) -> Option<&Drift> {
        self.drift.as_ref()
    }

    pub fn size(&self) -> usize {
        self.kernel.size()
    }

    /// `E_x ξ_1` for every state.
    pub fn expected_increment(&self) -> Vec<f64> {
        (0..self.size()).map(|x| row_mean(&self.kernel, &self.increment, x)).collect()
    }
}

fn row_mean(kernel: &Kernel, increment: &[Vec<f64>], x: usize) -> f64 {
    kernel.row(x).iter().zip(&increment[x]).map(|(p, v)| p * v).sum()
}

fn find_2d(m: &[Vec<f64>], pred: impl Fn(f64) -> bool) -> Option<(usize, usize)> {
    m.iter().enumerate().find_map(|(x, r)| r.iter().position(|&v| pred(v)).map(|y| (x, y)))
}

/// One transition of the split chain: the next state and whether the step
/// was a regeneration (next state drawn from `φ`).
pub fn split_step<R: Rng + ?Sized>(walk: &MarkovWalk, state: usize, rng: &mut R) -> (usize, bool) {
    if walk.atom.contains(state) {
        let alpha = walk.atom.alpha();
        if alpha >= 1.0 || rng.gen::<f64>() < alpha {
            return (sample_index(walk.atom.phi(), rng.gen()), true);
        }
        let row = walk.residual[state].as_ref().expect("residual row exists for α < 1");
        return (sample_index(row, rng.gen()), false);
    }
    (sample_index(walk.kernel.row(state), rng.gen()), false)
}

/// A simulated split-chain path.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationTrace {
    pub states: Vec<usize>,
    pub increments: Vec<f64>,
    /// Times `n` at which `X_n` was drawn from `φ`.
    pub epochs: Vec<usize>,
}

impl RegenerationTrace {
    /// Lengths of the complete blocks between consecutive epochs.
    pub fn block_lengths(&self) -> Vec<usize> {
        self.epochs.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn regeneration_trace<R: Rng + ?Sized>(
    walk: &MarkovWalk,
    start: usize,
    steps: usize,
    rng: &mut R,
) -> RegenerationTrace {
    let mut states = Vec::with_capacity(steps + 1);
    let mut increments = Vec::with_capacity(steps);
    let mut epochs = Vec::new();
    states.push(start);
    let mut x = start;
    for n in 1..=steps {
        let (y, regen) = split_step(walk, x, rng);
        increments.push(walk.increment[x][y]);
        if regen {
            epochs.push(n);
        }
        states.push(y);
        x = y;
    }
    RegenerationTrace { states, increments, epochs }
}

/// Solves `(I − P̃) γ = h` with `P̃(x, y) = P(x, y) − α φ(y) 1_G(x)` and
/// `h(x) = E_x ξ_1 − μ`, so `γ(x) = E_x(S_κ − κμ)` for the first
/// regeneration time `κ`.
pub fn gamma_exact(walk: &MarkovWalk) -> Result<Vec<f64>, RegenerationError> {
    let n = walk.size();
    let alpha = walk.atom.alpha();
    let phi = walk.atom.phi();
    let mut a = DMatrix::<f64>::identity(n, n);
    for x in 0..n {
        let split = if walk.atom.contains(x) { alpha } else { 0.0 };
        for y in 0..n {
            a[(x, y)] -= walk.kernel.get(x, y) - split * phi[y];
        }
    }
    let h = DVector::from_iterator(n, walk.expected_increment().into_iter().map(|e| e - walk.mu));
    let lu = a.clone().lu();
    let mut gamma = lu.solve(&h).ok_or(RegenerationError::SingularSystem)?;
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(RegenerationError::SingularSystem);
    }
    let residual = &h - &a * &gamma;
    if let Some(corr) = lu.solve(&residual) {
        gamma += corr;
    }
    Ok(gamma.iter().copied().collect())
}

/// `Σ_y P(x,y)[ξ(x,y) − μ + γ(y)] − γ(x)` per state; zero for a martingale
/// correction.
pub fn martingale_defect(walk: &MarkovWalk, gamma: &[f64]) -> Vec<f64> {
    (0..walk.size())
        .map(|x| {
            let step: f64 = walk
                .kernel
                .row(x)
                .iter()
                .zip(&walk.increment[x])
                .zip(gamma)
                .map(|((p, xi), g)| p * (xi - walk.mu + g))
                .sum();
            step - gamma[x]
        })
        .collect()
}

/// The finite-chain moment constant `K = max_x E_x ξ_1² / V(x)`.
pub fn second_moment_constant(walk: &MarkovWalk, drift: &Drift) -> f64 {
    (0..walk.size())
        .map(|x| {
            let m2: f64 = walk.kernel.row(x).iter().zip(&walk.increment[x]).map(|(p, v)| p * v * v).sum();
            m2 / drift.v[x]
        })
        .fold(0.0, f64::max)
}

/// Entrywise bound
/// `β^{-1}[V(x) + b + (V* + b) V* (1/α + 1)](K + 1 + |μ|)` on `|γ(x)|`,
/// with `β = b̄` and `V* = max_G V`.
pub fn gamma_bound(walk: &MarkovWalk) -> Result<Vec<f64>, RegenerationError> {
    let drift = walk.drift.as_ref().ok_or(RegenerationError::MissingDrift)?;
    let k = second_moment_constant(walk, drift);
    let v_star = walk.atom.states().iter().map(|&x| drift.v[x]).fold(f64::NEG_INFINITY, f64::max);
    let factor = (k + 1.0 + walk.mu.abs()) / drift.b_bar;
    let tail = (v_star + drift.b) * v_star * (1.0 / walk.atom.alpha() + 1.0);
    Ok(drift.v.iter().map(|&v| (v + drift.b + tail) * factor).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoppingRule {
    /// `τ = n`.
    Fixed(u64),
    /// `τ = inf{n ≥ 1 : S_n ≥ a}`.
    Passage(f64),
}

impl std::str::FromStr for StoppingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s.split_once(':').ok_or_else(|| format!("expected fixed:<n> or passage:<a>, got {s:?}"))?;
        match kind {
            "fixed" => value.parse().map(Self::Fixed).map_err(|e| format!("bad step count {value:?}: {e}")),
            "passage" => match value.parse::<f64>() {
                Ok(a) if a.is_finite() => Ok(Self::Passage(a)),
                _ => Err(format!("bad threshold {value:?}")),
            },
            _ => Err(format!("unknown stopping rule {kind:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Moment summary of a sample.
pub fn estimate(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    if values.is_empty() {
        return Estimate::default();
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Estimate { mean, se: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Estimate { mean, se: (var / n).sqrt() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactWald {
    pub e_s: f64,
    pub e_tau: f64,
    pub e_gamma_tau: f64,
    pub e_gamma_0: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldReport {
    pub reps: usize,
    pub mu: f64,
    pub e_s: Estimate,
    pub e_tau: Estimate,
    pub e_gamma_tau: Estimate,
    pub e_gamma_0: Estimate,
    /// `Ê S_τ − (μ Ê τ − Ê γ(X_τ) + Ê γ(X_0))`.
    pub residual: f64,
    /// Standard error of the per-path residual `S_τ − μτ + γ(X_τ) − γ(X_0)`.
    pub residual_se: f64,
    /// Matrix-power evaluation, for fixed-time rules.
    pub exact: Option<ExactWald>,
}

impl WaldReport {
    pub fn within(&self, standard_errors: f64) -> bool {
        self.residual.abs() <= standard_errors * self.residual_se
    }
}

/// Exact expectations for `τ = n` by propagating the law of `X_t`.
pub fn wald_exact(walk: &MarkovWalk, gamma: &[f64], start: &[f64], n: u64) -> ExactWald {
    let e_step = walk.expected_increment();
    let dot = |d: &[f64], f: &[f64]| d.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
    let mut law = start.to_vec();
    let mut e_s = 0.0;
    for _ in 0..n {
        e_s += dot(&law, &e_step);
        law = walk.kernel.push_forward(&law);
    }
    let e_tau = n as f64;
    let e_gamma_tau = dot(&law, gamma);
    let e_gamma_0 = dot(start, gamma);
    let residual = e_s - (walk.mu * e_tau - e_gamma_tau + e_gamma_0);
    ExactWald { e_s, e_tau, e_gamma_tau, e_gamma_0, residual }
}

fn check_start(walk: &MarkovWalk, start: &[f64]) -> Result<(), RegenerationError> {
    crate::markov::check_distribution(start, walk.size()).map_err(|e| RegenerationError::BadStart(e.to_string()))
}

/// Monte Carlo check of Wald's equation over `reps` independent paths started
/// from `start`, plus the exact evaluation for fixed-time rules.
pub fn wald_check(
    walk: &MarkovWalk,
    rule: StoppingRule,
    start: &[f64],
    reps: usize,
    seed: u64,
) -> Result<WaldReport, RegenerationError> {
    check_start(walk, start)?;
    if let StoppingRule::Passage(_) = rule {
        if walk.mu <= 0.0 {
            return Err(RegenerationError::NonPositiveDrift(walk.mu));
        }
    }
    let gamma = gamma_exact(walk)?;
    let paths: Vec<[f64; 4]> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, rep));
            let x0 = sample_index(start, rng.gen());
            let mut x = x0;
            let mut s = 0.0;
            let mut t: u64 = 0;
            loop {
                let done = match rule {
                    StoppingRule::Fixed(n) => t >= n,
                    StoppingRule::Passage(a) => t >= 1 && s >= a,
                };
                if done {
                    break;
                }
                if t >= MAX_PATH_STEPS {
                    return Err(RegenerationError::PathTooLong);
                }
                let y = sample_index(walk.kernel.row(x), rng.gen());
                s += walk.increment[x][y];
                x = y;
                t += 1;
            }
            Ok([s, t as f64, gamma[x], gamma[x0]])
        })
        .collect::<Result<_, _>>()?;
    let column = |i: usize| paths.iter().map(|p| p[i]).collect::<Vec<_>>();
    let per_path: Vec<f64> = paths.iter().map(|p| p[0] - walk.mu * p[1] + p[2] - p[3]).collect();
    let (e_s, e_tau, e_gamma_tau, e_gamma_0) =
        (estimate(&column(0)), estimate(&column(1)), estimate(&column(2)), estimate(&column(3)));
    let residual = e_s.mean - (walk.mu * e_tau.mean - e_gamma_tau.mean + e_gamma_0.mean);
    let exact = match rule {
        StoppingRule::Fixed(n) => Some(wald_exact(walk, &gamma, start, n)),
        StoppingRule::Passage(_) => None,
    };
    Ok(WaldReport {
        reps,
        mu: walk.mu,
        e_s,
        e_tau,
        e_gamma_tau,
        e_gamma_0,
        residual,
        residual_se: estimate(&per_path).se,
        exact,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassageRow {
    pub threshold: f64,
    pub e_max_block: Estimate,
    pub e_tau: Estimate,
    /// `Ê M_τ / Ê τ`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxBlockReport {
    /// `(c, Ê[(W_1 − c)^+])`.
    pub excess: Vec<(f64, f64)>,
    pub passage: Vec<PassageRow>,
}

impl MaxBlockReport {
    pub fn excess_nonincreasing(&self) -> bool {
        self.excess.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    pub fn ratio_decreasing(&self) -> bool {
        self.passage.windows(2).all(|w| w[1].ratio < w[0].ratio)
    }
}

/// Block sums `W = Σ |γ(X_t)|` over regeneration blocks: the tail of `W_1`
/// over the grid `cs`, and `M_τ` (the largest block sum among the blocks
/// started by first passage over each threshold, the block containing `τ`
/// run to completion) against `τ`.
pub fn max_block_check(
    walk: &MarkovWalk,
    start: &[f64],
    cs: &[f64],
    thresholds: &[f64],
    reps: usize,
    seed: u64,
) -> Result<MaxBlockReport, RegenerationError> {
    check_start(walk, start)?;
    if !thresholds.is_empty() && walk.mu <= 0.0 {
        return Err(RegenerationError::NonPositiveDrift(walk.mu));
    }
    let gamma = gamma_exact(walk)?;
    let abs_gamma: Vec<f64> = gamma.iter().map(|g| g.abs()).collect();

    let blocks: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, rep));
            let mut x = sample_index(walk.atom.phi(), rng.gen());
            let mut w = abs_gamma[x];
            loop {
                let (y, regen) = split_step(walk, x, &mut rng);
                if regen {
                    return w;
                }
                w += abs_gamma[y];
                x = y;
            }
        })
        .collect();
    let excess =
        cs.iter().map(|&c| (c, blocks.iter().map(|w| (w - c).max(0.0)).sum::<f64>() / reps.max(1) as f64)).collect();

    let mut passage = Vec::with_capacity(thresholds.len());
    for (ti, &a) in thresholds.iter().enumerate() {
        let rows: Vec<(f64, f64)> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 + ti as u64, rep));
                let mut x = sample_index(start, rng.gen());
                let (mut s, mut t, mut tau) = (0.0, 0u64, None);
                let (mut w, mut m) = (abs_gamma[x], 0.0f64);
                loop {
                    if t >= MAX_PATH_STEPS {
                        return Err(RegenerationError::PathTooLong);
                    }
                    let (y, regen) = split_step(walk, x, &mut rng);
                    s += walk.increment[x][y];
                    t += 1;
                    if regen {
                        m = m.max(w);
                        if tau.is_some() {
                            break;
                        }
                        w = 0.0;
                    }
                    w += abs_gamma[y];
                    x = y;
                    if tau.is_none() && s >= a {
                        tau = Some(t);
                    }
                }
                Ok((m, tau.expect("loop exits after passage") as f64))
            })
            .collect::<Result<_, _>>()?;
        let e_max_block = estimate(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
        let e_tau = estimate(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
        passage.push(PassageRow { threshold: a, e_max_block, e_tau, ratio: e_max_block.mean / e_tau.mean });
    }
    Ok(MaxBlockReport { excess, passage })
}

/// Monte Carlo estimate of `γ(x) = E_x(S_κ − κμ)` from `cycles` simulated
/// first blocks started at `x`.
pub fn gamma_monte_carlo(walk: &MarkovWalk, x: usize, cycles: usize, seed: u64) -> Estimate {
    let samples: Vec<f64> = (0..cycles as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, x as u64, rep));
            let mut state = x;
            let mut total = 0.0;
            loop {
                let (y, regen) = split_step(walk, state, &mut rng);
                total += walk.increment[state][y] - walk.mu;
                if regen {
                    return total;
                }
                state = y;
            }
        })
        .collect();
    estimate(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_walk() -> MarkovWalk {
        let k = Kernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let inc = vec![vec![0.1, -0.5], vec![1.0, 0.3]];
        let atom = Atom::new(vec![0, 1], 0.2, vec![0.5, 0.5], 2).unwrap();
        MarkovWalk::new(k, inc, atom, None).unwrap()
    }

    #[test]
    fn full_atom_always_regenerates() {
        let k = Kernel::iid(vec![0.3, 0.7]).unwrap();
        let atom = Atom::new(vec![0, 1], 1.0, vec![0.3, 0.7], 2).unwrap();
        let w = MarkovWalk::new(k, vec![vec![1.0, 2.0]; 2], atom, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(split_step(&w, 0, &mut rng).1);
        }
        let g = gamma_exact(&w).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn states_off_the_atom_never_regenerate() {
        let k = Kernel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let atom = Atom::new(vec![0], 0.5, vec![1.0], 2).unwrap();
        let w = MarkovWalk::new(k, vec![vec![0.0; 2]; 2], atom, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..1000).all(|_| !split_step(&w, 1, &mut rng).1));
    }

    #[test]
    fn regeneration_frequency_matches_alpha() {
        let w = two_state_walk();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trace = regeneration_trace(&w, 0, 100_000, &mut rng);
        let freq = trace.epochs.len() as f64 / 100_000.0;
        assert!((freq - 0.2).abs() < 0.01, "{freq}");
    }

    #[test]
    fn violated_minorization_is_rejected() {
        let k = Kernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let atom = Atom::new(vec![0, 1], 0.5, vec![0.5, 0.5], 2).unwrap();
        assert!(matches!(
            MarkovWalk::new(k, vec![vec![0.0; 2]; 2], atom, None),
            Err(RegenerationError::InvalidSplit { x: 0, y: 1 })
        ));
    }

    #[test]
    fn gamma_is_a_martingale_correction() {
        let w = two_state_walk();
        let g = gamma_exact(&w).unwrap();
        assert!(martingale_defect(&w, &g).iter().all(|d| d.abs() < 1e-12));
        let phi_mean: f64 = w.atom().phi().iter().zip(&g).map(|(p, v)| p * v).sum();
        assert!(phi_mean.abs() < 1e-12);
    }

    #[test]
    fn fixed_time_wald_is_exact() {
        let w = two_state_walk();
        let g = gamma_exact(&w).unwrap();
        for n in [1, 2, 50] {
            let e = wald_exact(&w, &g, &[0.3, 0.7], n);
            assert!(e.residual.abs() < 1e-12, "{n}: {}", e.residual);
        }
    }

    #[test]
    fn stopping_rules_parse() {
        assert_eq!("fixed:50".parse::<StoppingRule>(), Ok(StoppingRule::Fixed(50)));
        assert_eq!("passage:2.5".parse::<StoppingRule>(), Ok(StoppingRule::Passage(2.5)));
        assert!("passage:x".parse::<StoppingRule>().is_err());
        assert!("loop:3".parse::<StoppingRule>().is_err());
    }
}
