mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use precedence_bandit::instances::{doeblin_atom, flat_drift, markov_walk};
use precedence_bandit::regeneration::{
    gamma_bound, gamma_exact, gamma_monte_carlo, max_block_check, regeneration_trace, wald_check, MarkovWalk,
    RegenerationError, StoppingRule,
};
use precedence_bandit::{ArmId, Atom, Kernel};

use common::{martingale_gap, push, stationary_mean};

fn llr_walk() -> MarkovWalk {
    MarkovWalk::log_likelihood_ratio(markov_walk().arm(ArmId::new(0, 0)), 0, 1).unwrap()
}

fn iid_walk() -> MarkovWalk {
    let row = vec![0.2, 0.5, 0.3];
    let kernel = Kernel::iid(row.clone()).unwrap();
    let xi = vec![vec![-1.0, 0.5, 2.0]; 3];
    let atom = Atom::new(vec![0, 1, 2], 1.0, row, 3).unwrap();
    MarkovWalk::new(kernel, xi, atom, Some(flat_drift(3))).unwrap()
}

/// Asymptotic p-value of the two-sample Kolmogorov–Smirnov statistic.
fn ks_p_value(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let q: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    q.clamp(0.0, 1.0)
}

#[test]
fn iid_full_atom_needs_no_correction() {
    let w = iid_walk();
    let gamma = gamma_exact(&w).unwrap();
    let e: Vec<f64> = w.expected_increment();
    assert!(e.iter().all(|v| (v - w.mu()).abs() < 1e-15));
    assert!(gamma.iter().all(|g| g.abs() < 1e-12), "{gamma:?}");
    assert!(gamma_bound(&w).unwrap().iter().all(|&b| b > 0.0));
}

#[test]
fn gamma_averages_to_zero_under_phi() {
    let w = llr_walk();
    let gamma = gamma_exact(&w).unwrap();
    let avg: f64 = w.atom().phi().iter().zip(&gamma).map(|(p, g)| p * g).sum();
    assert!(avg.abs() < 1e-12);
}

#[test]
fn gamma_matches_block_monte_carlo() {
    let w = llr_walk();
    let gamma = gamma_exact(&w).unwrap();
    for x in 0..w.size() {
        let est = gamma_monte_carlo(&w, x, 1_000_000, 21);
        assert!((est.mean - gamma[x]).abs() <= 3.0 * est.se, "x = {x}: {} ± {} vs {}", est.mean, est.se, gamma[x]);
    }
}

#[test]
fn bound_survives_scaling() {
    let w = llr_walk();
    for c in [0.1, 1.0, 3.0, 20.0] {
        let s = w.scaled(c).unwrap();
        let gamma = gamma_exact(&s).unwrap();
        let base = gamma_exact(&w).unwrap();
        for (g, b) in gamma.iter().zip(&base) {
            assert!((g - c * b).abs() <= 1e-9 * (1.0 + c));
        }
        let bound = gamma_bound(&s).unwrap();
        assert!(gamma.iter().zip(&bound).all(|(g, b)| g.abs() <= *b));
    }
}

#[test]
fn martingale_identity_on_the_shipped_walk() {
    let w = llr_walk();
    let p = w.kernel().to_rows();
    let xi: Vec<Vec<f64>> = (0..2).map(|x| (0..2).map(|y| w.increment(x, y)).collect()).collect();
    let mu = stationary_mean(&p, &xi);
    assert!(martingale_gap(&p, &xi, mu, &gamma_exact(&w).unwrap()) < 1e-12);
}

#[test]
fn single_step_from_phi_is_exact() {
    let w = llr_walk();
    let gamma = gamma_exact(&w).unwrap();
    let phi = w.atom().phi().to_vec();
    let r = wald_check(&w, StoppingRule::Fixed(1), &phi, 2, 0).unwrap();
    let ex = r.exact.unwrap();
    let next = push(&phi, &w.kernel().to_rows());
    let e_g1: f64 = next.iter().zip(&gamma).map(|(l, g)| l * g).sum();
    let e_g0: f64 = phi.iter().zip(&gamma).map(|(l, g)| l * g).sum();
    let e_s: f64 = w.expected_increment().iter().zip(&phi).map(|(e, p)| e * p).sum();
    assert!((e_s - (w.mu() - e_g1 + e_g0)).abs() < 1e-12);
    assert!(ex.residual.abs() < 1e-12);
}

#[test]
fn classical_wald_for_iid_increments() {
    let w = iid_walk();
    let r = wald_check(&w, StoppingRule::Passage(50.0), &[0.2, 0.5, 0.3], 10_000, 3).unwrap();
    assert!(r.within(3.0), "residual {} se {}", r.residual, r.residual_se);
    assert!(r.e_gamma_tau.mean.abs() < 1e-12 && r.e_gamma_0.mean.abs() < 1e-12);
}

#[test]
fn passage_needs_positive_drift() {
    let w = llr_walk().scaled(-1.0).unwrap();
    let err = wald_check(&w, StoppingRule::Passage(10.0), &[1.0, 0.0], 10, 0).unwrap_err();
    assert!(matches!(err, RegenerationError::NonPositiveDrift(_)));
}

#[test]
fn blocks_are_identically_distributed() {
    let w = llr_walk();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // about α·steps regenerations
    let trace = regeneration_trace(&w, 0, 40_000, &mut rng);
    let lengths: Vec<f64> = trace.block_lengths().iter().map(|&l| l as f64).collect();
    assert!(lengths.len() >= 10_000, "{} blocks", lengths.len());
    let m = 10_000;
    let (a, b) = lengths[..m].split_at(m / 2);
    let p = ks_p_value(a, b);
    assert!(p >= 0.01, "KS p = {p}");
}

#[test]
fn regenerations_restart_from_phi() {
    let w = llr_walk();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let trace = regeneration_trace(&w, 0, 40_000, &mut rng);
    let picks: Vec<usize> = trace.epochs.iter().take(10_000).map(|&e| trace.states[e]).collect();
    assert_eq!(picks.len(), 10_000);
    let phi = w.atom().phi();
    let mut counts = vec![0.0; w.size()];
    for &x in &picks {
        counts[x] += 1.0;
    }
    let n = picks.len() as f64;
    let stat: f64 = counts.iter().zip(phi).map(|(o, p)| (o - n * p).powi(2) / (n * p)).sum();
    let p = 1.0 - ChiSquared::new((w.size() - 1) as f64).unwrap().cdf(stat);
    assert!(p >= 0.01, "chi-square p = {p}");
}

#[test]
fn block_maxima_grow_slower_than_passage_time() {
    let w = llr_walk();
    let cs = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
    let r = max_block_check(&w, &[1.0, 0.0], &cs, &[10.0, 100.0, 1000.0], 10_000, 41).unwrap();
    assert!(r.excess_nonincreasing(), "{:?}", r.excess);
    assert!(r.excess.last().unwrap().1 < r.excess[0].1);
    assert!(r.ratio_decreasing(), "{:?}", r.passage.iter().map(|p| p.ratio).collect::<Vec<_>>());
}

#[test]
fn zero_gamma_gives_zero_block_sums() {
    let w = iid_walk();
    let r = max_block_check(&w, &[0.2, 0.5, 0.3], &[0.0, 1.0], &[5.0], 200, 1).unwrap();
    assert!(r.excess.iter().all(|&(_, e)| e == 0.0));
    assert!(r.passage.iter().all(|p| p.e_max_block.mean == 0.0));
}

#[test]
fn random_chains_keep_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for n in 2..=20 {
        let p = common::random_stochastic(&mut rng, n, 0.01);
        let kernel = Kernel::new(p.clone()).unwrap();
        let xi: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| ((x * 7 + y * 3) % 5) as f64 - 1.5).collect()).collect();
        let atom = doeblin_atom(std::slice::from_ref(&kernel));
        let w = MarkovWalk::new(kernel, xi.clone(), atom, Some(flat_drift(n))).unwrap();
        let gamma = gamma_exact(&w).unwrap();
        assert!(martingale_gap(&p, &xi, stationary_mean(&p, &xi), &gamma) < 1e-10, "size {n}");
        let bound = gamma_bound(&w).unwrap();
        assert!(gamma.iter().zip(&bound).all(|(g, b)| g.abs() <= *b), "size {n}");
    }
}
