//! `pbandit`: command-line front end of the simulation lab.
//!
//! Exit status is 0 on success, 1 when a model or a requested check fails,
//! and 2 for malformed arguments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use precedence_bandit::lower_bound::lower_bound;
use precedence_bandit::regeneration::{wald_check, MarkovWalk, StoppingRule};
use precedence_bandit::sim::{
    format_g12 as g, monte_carlo, read_model, reward_gap_check, super_efficiency_check, switching_report, CsvTable,
    Instance, PolicyKind, SimError,
};
use precedence_bandit::{ArmId, Model};

#[derive(Debug, Parser)]
#[command(name = "pbandit", version, about = "Precedence-constrained Markovian bandit simulation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the chain conditions and grid assumptions, and print the
    /// partition and bad sets.
    Validate { model: PathBuf },
    /// Solve the lower-bound program at one point (CSV of `z_ij` and the value).
    LowerBound {
        model: PathBuf,
        #[arg(long)]
        theta: usize,
    },
    /// Monte Carlo regret curve (CSV).
    Simulate(RunArgs),
    /// Wald's equation for the log-likelihood-ratio walk of one arm.
    WaldCheck {
        model: PathBuf,
        /// One-based `group.arm`, e.g. `1.2`.
        #[arg(long)]
        arm: String,
        #[arg(long)]
        theta0: usize,
        #[arg(long)]
        thetaq: usize,
        /// `fixed:<n>` or `passage:<a>`.
        #[arg(long)]
        rule: StoppingRule,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inferior pulls in the optimal group per `ln N` (requires an empty bad set).
    SuperEfficiency(RunArgs),
    /// Switching cost per `ln N`.
    Switching {
        #[command(flatten)]
        run: RunArgs,
        /// Cost per switch; defaults to the model's `switching_cost`.
        #[arg(long)]
        cost: Option<f64>,
    },
    /// Realized reward against `Σ μ_ij T_N(ij)` with a trend test on `ln N`.
    RewardGap(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    model: PathBuf,
    #[arg(long)]
    theta: usize,
    /// Comma-separated, strictly increasing horizons.
    #[arg(long = "N", value_delimiter = ',', required = true)]
    horizons: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = PolicyKind::Paper)]
    policy: PolicyKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Check(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Check(_) => 1,
            Self::Usage(_) => 2,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::UnknownPoint(_) | SimError::Setup(_) => Self::Usage(e.to_string()),
            _ => Self::Check(e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<Model, Failure> {
    read_model(path).map_err(|e| Failure::Check(e.to_string()))
}

fn instance(path: &Path) -> Result<Instance, Failure> {
    Ok(Instance::new(load(path)?)?)
}

fn parse_arm(s: &str, model: &Model) -> Result<ArmId, Failure> {
    let bad = || Failure::Usage(format!("arm must be one-based `group.arm`, got {s:?}"));
    let (i, j) = s.split_once('.').ok_or_else(bad)?;
    let (i, j): (usize, usize) = (i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?);
    if i == 0 || j == 0 || i > model.group_count() || j > model.groups[i - 1].len() {
        return Err(Failure::Usage(format!("model has no arm {s}")));
    }
    Ok(ArmId::new(i - 1, j - 1))
}

fn check_point(model: &Model, theta: usize) -> Result<(), Failure> {
    if theta < model.point_count() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("unknown parameter point {theta} (model has {})", model.point_count())))
    }
}

fn validate(path: &Path) -> Result<(), Failure> {
    let model = load(path)?;
    let mut ok = true;
    let chains = model.chain_report();
    for issue in &chains.issues {
        println!("chain arm {} point {}: {}", issue.arm, issue.point, issue.problem);
    }
    ok &= chains.holds();
    let inst = Instance::new(model)?;
    let grid = &inst.grid;
    let report = grid.validate_assumptions();
    for g in &report.redundant_groups {
        println!("group {} is never the first optimal group", g + 1);
    }
    for (a, b) in &report.uninformative_pairs {
        println!("group 1 cannot separate points {a} and {b}");
    }
    for w in &report.blocked_transitions {
        println!("arm {} carries no information between points {} and {}", w.arm, w.theta, w.theta_prime);
    }
    ok &= report.holds();
    println!("groups {}, arms {:?}, points {}", grid.group_count(), grid.arms_per_group(), grid.point_count());
    for k in 0..grid.group_count() {
        println!("group {}: points {:?}", k + 1, grid.points_in_group(k));
    }
    for theta in 0..grid.point_count() {
        let optimal: Vec<String> =
            grid.optimal_set(theta).iter().map(|&j| ArmId::new(grid.group_index(theta), j).to_string()).collect();
        println!("point {theta}: optimal {} bad set {:?}", optimal.join(" "), grid.bad_set(theta));
    }
    if ok {
        println!("ok");
        Ok(())
    } else {
        Err(Failure::Check("model fails validation".into()))
    }
}

fn print_lower_bound(path: &Path, theta: usize) -> Result<(), Failure> {
    let inst = instance(path)?;
    check_point(&inst.model, theta)?;
    let sol = lower_bound(&inst.grid, theta).map_err(|e| Failure::Check(e.to_string()))?;
    let mut t = CsvTable::new(&["arm", "z"]);
    for (arm, z) in &sol.z {
        t.push(vec![arm.to_string(), g(*z)]);
    }
    t.push(vec!["value".into(), g(sol.value)]);
    print!("{}", t.render());
    Ok(())
}

fn simulate(a: &RunArgs) -> Result<(), Failure> {
    let inst = instance(&a.model)?;
    check_point(&inst.model, a.theta)?;
    let run = monte_carlo(&inst, a.theta, &a.horizons, a.reps, a.policy, a.seed)?;
    print!("{}", run.curve.to_csv().render());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn wald(
    path: &Path,
    arm: &str,
    theta0: usize,
    thetaq: usize,
    rule: StoppingRule,
    reps: usize,
    seed: u64,
) -> Result<(), Failure> {
    let model = load(path)?;
    let id = parse_arm(arm, &model)?;
    check_point(&model, theta0)?;
    check_point(&model, thetaq)?;
    if reps < 2 {
        return Err(Failure::Usage("need at least 2 replications".into()));
    }
    let spec = model.arm(id);
    let fail = |e: precedence_bandit::regeneration::RegenerationError| Failure::Check(e.to_string());
    let walk = MarkovWalk::log_likelihood_ratio(spec, theta0, thetaq).map_err(fail)?;
    let start = spec.initial(theta0).map_err(|e| Failure::Check(e.to_string()))?;
    let r = wald_check(&walk, rule, start, reps, seed).map_err(fail)?;
    let mut t = CsvTable::new(&[
        "reps",
        "mu",
        "e_s",
        "se_s",
        "e_tau",
        "se_tau",
        "e_gamma_tau",
        "e_gamma_0",
        "residual",
        "residual_se",
        "exact_residual",
    ]);
    t.push(vec![
        r.reps.to_string(),
        g(r.mu),
        g(r.e_s.mean),
        g(r.e_s.se),
        g(r.e_tau.mean),
        g(r.e_tau.se),
        g(r.e_gamma_tau.mean),
        g(r.e_gamma_0.mean),
        g(r.residual),
        g(r.residual_se),
        r.exact.as_ref().map_or_else(|| "NA".into(), |e| g(e.residual)),
    ]);
    print!("{}", t.render());
    Ok(())
}

fn super_efficiency(a: &RunArgs) -> Result<(), Failure> {
    let inst = instance(&a.model)?;
    check_point(&inst.model, a.theta)?;
    if a.policy != PolicyKind::Paper {
        return Err(Failure::Usage("super-efficiency runs the four-stage rule only (--policy paper)".into()));
    }
    let r = super_efficiency_check(&inst, a.theta, &a.horizons, a.reps, a.seed)?;
    let mut t = CsvTable::new(&["N", "inferior_optimal_group_pulls_per_log_N", "se"]);
    for (n, m, se) in &r.rows {
        t.push(vec![n.to_string(), g(*m), g(*se)]);
    }
    print!("{}", t.render());
    Ok(())
}

fn switching(a: &RunArgs, cost: Option<f64>) -> Result<(), Failure> {
    let inst = instance(&a.model)?;
    check_point(&inst.model, a.theta)?;
    let cost = cost
        .or(inst.model.switching_cost)
        .ok_or_else(|| Failure::Usage("no switching cost: pass --cost or set switching_cost in the model".into()))?;
    let run = monte_carlo(&inst, a.theta, &a.horizons, a.reps, a.policy, a.seed)?;
    let r = switching_report(&run.curve, cost);
    let mut t = CsvTable::new(&["N", "mean_switches", "cost_per_log_N"]);
    for (row, (n, c)) in run.curve.rows.iter().zip(&r.rows) {
        t.push(vec![n.to_string(), g(row.mean_switches), g(*c)]);
    }
    print!("{}", t.render());
    Ok(())
}

fn reward_gap(a: &RunArgs) -> Result<(), Failure> {
    let inst = instance(&a.model)?;
    check_point(&inst.model, a.theta)?;
    let r = reward_gap_check(&inst, a.theta, a.policy, &a.horizons, a.reps, a.seed)?;
    let mut t = CsvTable::new(&["N", "gap", "se"]);
    for row in &r.rows {
        t.push(vec![row.horizon.to_string(), g(row.gap.mean), g(row.gap.se)]);
    }
    print!("{}", t.render());
    eprintln!(
        "max |gap| {}, slope on ln N {} (se {}), one-sided p {}",
        g(r.max_abs_gap),
        g(r.slope),
        g(r.slope_se),
        g(r.p_value)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { model } => validate(model),
        Command::LowerBound { model, theta } => print_lower_bound(model, *theta),
        Command::Simulate(a) => simulate(a),
        Command::WaldCheck { model, arm, theta0, thetaq, rule, reps, seed } => {
            wald(model, arm, *theta0, *thetaq, *rule, *reps, *seed)
        }
        Command::SuperEfficiency(a) => super_efficiency(a),
        Command::Switching { run, cost } => switching(run, *cost),
        Command::RewardGap(a) => reward_gap(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Check(msg) | Failure::Usage(msg)) = &f;
            eprintln!("pbandit: {msg}");
            ExitCode::from(f.code())
        }
    }
}
