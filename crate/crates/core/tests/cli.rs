use std::path::PathBuf;
use std::process::{Command, Output};

use precedence_bandit::instances::{bernoulli_pair, markov_walk, one_arm_per_group, super_efficiency};
use precedence_bandit::sim::read_model;

fn model(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "models", &format!("{name}.toml")].iter().collect();
    p.display().to_string()
}

fn pbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbandit")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn shipped_models_match_the_builders() {
    for (name, built) in [
        ("bernoulli_pair", bernoulli_pair()),
        ("markov_walk", markov_walk()),
        ("one_arm_per_group", one_arm_per_group()),
        ("super_efficiency", super_efficiency()),
    ] {
        assert_eq!(read_model(model(name).as_ref()).unwrap(), built, "{name}");
        let o = pbandit(&["validate", &model(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
        assert!(stdout(&o).ends_with("ok\n"));
    }
}

#[test]
fn validate_lists_bad_sets() {
    let o = pbandit(&["validate", &model("super_efficiency")]);
    assert!(stdout(&o).contains("point 2: optimal 2.1 bad set [3]"));
}

#[test]
fn validation_failure_exits_with_one() {
    let dir = std::env::temp_dir().join(format!("pbandit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    // two identical points: the first group cannot tell them apart
    let text = std::fs::read_to_string(model("markov_walk")).unwrap();
    let start = text.find("kernels = ").unwrap();
    let end = start + text[start..].find('\n').unwrap();
    let broken =
        format!("{}kernels = [[[0.9, 0.1], [0.2, 0.8]], [[0.9, 0.1], [0.2, 0.8]]]{}", &text[..start], &text[end..]);
    let path = dir.join("twins.toml");
    std::fs::write(&path, broken).unwrap();
    let o = pbandit(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("cannot separate points 0 and 1"));

    std::fs::write(&path, "states = 2\n").unwrap();
    assert_eq!(pbandit(&["validate", path.to_str().unwrap()]).status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bad_arguments_exit_with_two() {
    let m = model("bernoulli_pair");
    for args in [
        vec!["simulate", &m, "--theta", "2", "--N", "ten"],
        vec!["simulate", &m, "--theta", "99", "--N", "100"],
        vec!["simulate", &m, "--theta", "2", "--N", "100,50"],
        vec!["simulate", &m, "--theta", "2", "--N", "100", "--policy", "oracle"],
        vec!["wald-check", &m, "--arm", "3.1", "--theta0", "0", "--thetaq", "1", "--rule", "fixed:5"],
        vec!["wald-check", &m, "--arm", "1.1", "--theta0", "0", "--thetaq", "1", "--rule", "later"],
        vec!["frobnicate"],
    ] {
        assert_eq!(pbandit(&args).status.code(), Some(2), "{args:?}");
    }
    let m = model("markov_walk");
    let o = pbandit(&["switching", &m, "--theta", "0", "--N", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lower_bound_csv() {
    let o = pbandit(&["lower-bound", &model("bernoulli_pair"), "--theta", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "arm,z");
    assert!(lines[1].starts_with("1.2,"));
    assert!(lines.last().unwrap().starts_with("value,"));
}

#[test]
fn simulate_csv_has_the_curve_columns() {
    let o = pbandit(&["simulate", &model("bernoulli_pair"), "--theta", "2", "--N", "100,1000", "--reps", "10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "N,mean_regret,se_regret,regret_per_log_N,inferior_optimal_group_pulls_per_log_N,mean_switches,z_ref"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "100");
    assert!(rows.iter().all(|r| r.len() == 7 && r[6] == "0.266423831983"));
}

#[test]
fn wald_check_reports_exact_residual_for_fixed_time() {
    let m = model("markov_walk");
    let o = pbandit(&[
        "wald-check",
        &m,
        "--arm",
        "1.1",
        "--theta0",
        "0",
        "--thetaq",
        "1",
        "--rule",
        "fixed:50",
        "--reps",
        "200",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let exact: f64 = row.last().unwrap().parse().unwrap();
    assert!(exact.abs() <= 1e-10);
    let o = pbandit(&[
        "wald-check",
        &m,
        "--arm",
        "1.1",
        "--theta0",
        "0",
        "--thetaq",
        "1",
        "--rule",
        "passage:20",
        "--reps",
        "200",
    ]);
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",NA"));
}

#[test]
fn report_subcommands_run() {
    let o = pbandit(&["super-efficiency", &model("super_efficiency"), "--theta", "1", "--N", "200,400", "--reps", "5"]);
    assert!(o.status.success());
    let o = pbandit(&["super-efficiency", &model("super_efficiency"), "--theta", "2", "--N", "200,400", "--reps", "5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = pbandit(&["switching", &model("bernoulli_pair"), "--theta", "2", "--N", "200,400", "--reps", "5"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("N,mean_switches,cost_per_log_N\n"));
    let o = pbandit(&[
        "reward-gap",
        &model("markov_walk"),
        "--theta",
        "0",
        "--N",
        "100,200",
        "--reps",
        "10",
        "--policy",
        "uniform",
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("one-sided p"));
}
