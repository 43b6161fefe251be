//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.

#![allow(dead_code)]

use rand::Rng;

pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Stationary law by repeated squaring of the transition matrix.
pub fn stationary_by_power(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut m = p.to_vec();
    for _ in 0..60 {
        m = matmul(&m, &m);
    }
    let mut pi: Vec<f64> = (0..n).map(|y| (0..n).map(|x| m[x][y]).sum::<f64>() / n as f64).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    pi
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

/// Row vector times matrix.
pub fn push(law: &[f64], p: &[Vec<f64>]) -> Vec<f64> {
    (0..p[0].len()).map(|y| law.iter().zip(p).map(|(l, row)| l * row[y]).sum()).collect()
}

/// `Σ_x π(x) Σ_y P(x,y) log(P(x,y)/Q(x,y))`, skipping `P(x,y) = 0`.
pub fn markov_kl(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    let pi = stationary_by_power(p);
    let mut total = 0.0;
    for x in 0..p.len() {
        for y in 0..p.len() {
            if p[x][y] > 0.0 {
                total += pi[x] * p[x][y] * (p[x][y] / q[x][y]).ln();
            }
        }
    }
    total
}

pub fn random_stochastic<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| floor + rng.gen::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None`
/// when a pivot falls below `1e-12`.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// `min c·z` over `{A z ≥ 1, z ≥ 0}` by enumerating every basic solution.
/// Returns `None` when no vertex is feasible.
pub fn covering_by_vertices(cost: &[f64], rows: &[Vec<f64>]) -> Option<f64> {
    let n = cost.len();
    let mut planes: Vec<(Vec<f64>, f64)> = rows.iter().map(|r| (r.clone(), 1.0)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    for pick in subsets(planes.len(), n) {
        let a = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b = pick.iter().map(|&i| planes[i].1).collect();
        let Some(z) = solve_dense(a, b) else { continue };
        let feasible = z.iter().all(|&v| v >= -1e-9)
            && rows.iter().all(|r| r.iter().zip(&z).map(|(a, v)| a * v).sum::<f64>() >= 1.0 - 1e-9);
        if feasible {
            let value: f64 = cost.iter().zip(&z).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(value, |b: f64| b.min(value)));
        }
    }
    best
}

/// `Σ_x π(x) Σ_y P(x,y) ξ(x,y)`.
pub fn stationary_mean(p: &[Vec<f64>], xi: &[Vec<f64>]) -> f64 {
    let pi = stationary_by_power(p);
    (0..p.len()).map(|x| pi[x] * (0..p.len()).map(|y| p[x][y] * xi[x][y]).sum::<f64>()).sum()
}

/// `max_x |Σ_y P(x,y)(ξ(x,y) − μ + γ(y)) − γ(x)|`.
pub fn martingale_gap(p: &[Vec<f64>], xi: &[Vec<f64>], mu: f64, gamma: &[f64]) -> f64 {
    (0..p.len())
        .map(|x| {
            let e: f64 = (0..p.len()).map(|y| p[x][y] * (xi[x][y] - mu + gamma[y])).sum();
            (e - gamma[x]).abs()
        })
        .fold(0.0, f64::max)
}
