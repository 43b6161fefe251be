use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::episode::{run_episode, EpisodeStats, Instance, PolicyKind};
use super::SimError;
use crate::lower_bound::lower_bound;
use crate::markov::{stationary_distribution, Kernel};
use crate::regeneration::Estimate;
use crate::seeds::derive_seed;
use crate::strategy::StrategyConfig;

/// Neumaier-compensated sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_se(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    if values.is_empty() {
        return Estimate::default();
    }
    let mean = neumaier_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return Estimate { mean, se: 0.0 };
    }
    let var = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    Estimate { mean, se: (var / n).sqrt() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub horizon: u64,
    pub mean_regret: f64,
    pub se_regret: f64,
    pub regret_per_log: f64,
    pub inferior_per_log: f64,
    pub mean_switches: f64,
    /// `z(θ, ℓ)`; absent when the lower-bound program has no solution.
    pub z_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub policy: PolicyKind,
    pub theta: usize,
    pub rows: Vec<CurveRow>,
}

impl RegretCurve {
    pub const HEADER: [&'static str; 7] = [
        "N",
        "mean_regret",
        "se_regret",
        "regret_per_log_N",
        "inferior_optimal_group_pulls_per_log_N",
        "mean_switches",
        "z_ref",
    ];

    pub fn to_csv(&self) -> super::CsvTable {
        use super::format_g12 as g;
        let mut t = super::CsvTable::new(&Self::HEADER);
        for r in &self.rows {
            t.push(vec![
                r.horizon.to_string(),
                g(r.mean_regret),
                g(r.se_regret),
                g(r.regret_per_log),
                g(r.inferior_per_log),
                g(r.mean_switches),
                r.z_ref.map_or_else(|| "NA".into(), g),
            ]);
        }
        t
    }
}

/// A regret curve together with the per-episode statistics behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRun {
    pub curve: RegretCurve,
    /// `episodes[h][r]` for horizon index `h` and replication `r`.
    pub episodes: Vec<Vec<EpisodeStats>>,
}

fn check_horizons(horizons: &[u64], reps: usize) -> Result<(), SimError> {
    if reps < 2 {
        return Err(SimError::Setup(format!("need at least 2 replications, got {reps}")));
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::Setup("horizons must be a nonempty strictly increasing list".into()));
    }
    if horizons[0] < 3 {
        return Err(SimError::Setup("horizons must be at least 3".into()));
    }
    Ok(())
}

/// Runs `reps` episodes for every horizon; episode `r` at horizon `N` uses
/// the seed derived from `(master_seed, N, r)`.
pub fn monte_carlo(
    inst: &Instance,
    theta_true: usize,
    horizons: &[u64],
    reps: usize,
    policy: PolicyKind,
    master_seed: u64,
) -> Result<MonteCarloRun, SimError> {
    inst.check_point(theta_true)?;
    check_horizons(horizons, reps)?;
    let z_ref = lower_bound(&inst.grid, theta_true).ok().map(|s| s.value);
    let j1 = inst.grid.arms_per_group()[0];
    let mut rows = Vec::with_capacity(horizons.len());
    let mut episodes = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let config = StrategyConfig::with_default_schedules(n, j1);
        let stats: Vec<EpisodeStats> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                run_episode(inst, theta_true, &config, policy, derive_seed(master_seed, n, r))
                    .map(|e| e.stats(&inst.grid, theta_true))
            })
            .collect::<Result<_, _>>()?;
        let log_n = (n as f64).ln();
        let regret = mean_se(&stats.iter().map(|s| s.regret).collect::<Vec<_>>());
        let inferior = mean_se(&stats.iter().map(|s| s.inferior_optimal_group_pulls as f64).collect::<Vec<_>>());
        let switches = mean_se(&stats.iter().map(|s| s.switches as f64).collect::<Vec<_>>());
        rows.push(CurveRow {
            horizon: n,
            mean_regret: regret.mean,
            se_regret: regret.se,
            regret_per_log: regret.mean / log_n,
            inferior_per_log: inferior.mean / log_n,
            mean_switches: switches.mean,
            z_ref,
        });
        episodes.push(stats);
    }
    Ok(MonteCarloRun { curve: RegretCurve { policy, theta: theta_true, rows }, episodes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardGapRow {
    pub horizon: u64,
    /// `Ŵ_N − Σ μ_ij Ê T_N(ij)`.
    pub gap: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardGapReport {
    pub rows: Vec<RewardGapRow>,
    pub max_abs_gap: f64,
    /// OLS slope of the per-episode gap (signed toward the pooled mean) on
    /// `ln N`.
    pub slope: f64,
    pub slope_se: f64,
    /// One-sided p-value for a positive slope.
    pub p_value: f64,
}

impl RewardGapReport {
    /// No significant growth at level 0.05.
    pub fn bounded(&self) -> bool {
        self.p_value >= 0.05
    }
}

/// Monte Carlo estimate of the gap between realized reward and
/// `Σ μ_ij T_N(ij)` across horizons, with a trend test on `ln N`.
pub fn reward_gap_check(
    inst: &Instance,
    theta_true: usize,
    policy: PolicyKind,
    horizons: &[u64],
    reps: usize,
    master_seed: u64,
) -> Result<RewardGapReport, SimError> {
    let run = monte_carlo(inst, theta_true, horizons, reps, policy, master_seed)?;
    let rows: Vec<RewardGapRow> = horizons
        .iter()
        .zip(&run.episodes)
        .map(|(&n, eps)| RewardGapRow {
            horizon: n,
            gap: mean_se(&eps.iter().map(|e| e.reward_gap).collect::<Vec<_>>()),
        })
        .collect();
    let max_abs_gap = rows.iter().map(|r| r.gap.mean.abs()).fold(0.0, f64::max);

    let pooled = neumaier_sum(run.episodes.iter().flatten().map(|e| e.reward_gap));
    let sign = if pooled < 0.0 { -1.0 } else { 1.0 };
    let (xs, ys): (Vec<f64>, Vec<f64>) = horizons
        .iter()
        .zip(&run.episodes)
        .flat_map(|(&n, eps)| eps.iter().map(move |e| ((n as f64).ln(), sign * e.reward_gap)))
        .unzip();
    let (slope, slope_se) = ols_slope(&xs, &ys);
    let p_value = if slope_se > 0.0 {
        let t = StudentsT::new(0.0, 1.0, (xs.len() - 2) as f64).expect("at least two degrees of freedom");
        1.0 - t.cdf(slope / slope_se)
    } else if slope > 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(RewardGapReport { rows, max_abs_gap, slope, slope_se, p_value })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = neumaier_sum(xs.iter().copied()) / n;
    let my = neumaier_sum(ys.iter().copied()) / n;
    let sxx = neumaier_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = neumaier_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = neumaier_sum(xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)));
    (slope, (sse / (n - 2.0) / sxx).sqrt())
}

/// `|E g(X_t) − μ|` for `t = 1..=steps` with `X_0 ~ start`, computed by
/// propagating the law of the chain.
pub fn exact_transient_gap(
    kernel: &Kernel,
    start: &[f64],
    rewards: &[f64],
    steps: usize,
) -> Result<Vec<f64>, SimError> {
    let pi = stationary_distribution(kernel)?;
    let mu: f64 = pi.iter().zip(rewards).map(|(p, g)| p * g).sum();
    let mut law = start.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        law = kernel.push_forward(&law);
        let eg: f64 = law.iter().zip(rewards).map(|(p, g)| p * g).sum();
        out.push((eg - mu).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperEfficiencyReport {
    /// `(N, mean Σ_{j∉J(θ)} T_N(ℓj) / ln N, its standard error)`.
    pub rows: Vec<(u64, f64, f64)>,
}

impl SuperEfficiencyReport {
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].1 < w[0].1)
    }

    /// Value at the largest horizon over the value at the smallest.
    pub fn ratio(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.1 / a.1,
            _ => f64::NAN,
        }
    }
}

/// Pulls of the non-optimal arms of the first optimal group per `ln N`,
/// under the four-stage rule, for a point with an empty bad set.
pub fn super_efficiency_check(
    inst: &Instance,
    theta_true: usize,
    horizons: &[u64],
    reps: usize,
    master_seed: u64,
) -> Result<SuperEfficiencyReport, SimError> {
    inst.check_point(theta_true)?;
    let bad = inst.grid.bad_set(theta_true);
    if !bad.is_empty() {
        return Err(SimError::NonEmptyBadSet { theta: theta_true, points: bad });
    }
    let run = monte_carlo(inst, theta_true, horizons, reps, PolicyKind::Paper, master_seed)?;
    let rows = horizons
        .iter()
        .zip(&run.episodes)
        .map(|(&n, eps)| {
            let e = mean_se(&eps.iter().map(|e| e.inferior_optimal_group_pulls as f64).collect::<Vec<_>>());
            let log_n = (n as f64).ln();
            (n, e.mean / log_n, e.se / log_n)
        })
        .collect();
    Ok(SuperEfficiencyReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingReport {
    /// `(N, a · mean switches / ln N)`.
    pub rows: Vec<(u64, f64)>,
}

impl SwitchingReport {
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

pub fn switching_report(curve: &RegretCurve, cost: f64) -> SwitchingReport {
    SwitchingReport {
        rows: curve.rows.iter().map(|r| (r.horizon, cost * r.mean_switches / (r.horizon as f64).ln())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(neumaier_sum(v), 1.0);
    }

    #[test]
    fn ols_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.1, 4.9, 7.0];
        let (s, se) = ols_slope(&xs, &ys);
        assert!((s - 1.98).abs() < 1e-12);
        assert!(se > 0.0 && se < 0.1);
    }

    #[test]
    fn transient_gap_of_iid_chain_vanishes() {
        let k = Kernel::iid(vec![0.3, 0.7]).unwrap();
        let gaps = exact_transient_gap(&k, &[1.0, 0.0], &[0.0, 1.0], 5).unwrap();
        assert!(gaps.iter().all(|g| g.abs() < 1e-15));
    }
}
