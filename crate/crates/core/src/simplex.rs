//! Dense tableau simplex for small covering programs
//!
//! ```text
//! minimize c·z  subject to  A z ≥ 1,  z ≥ 0,     with c ≥ 0, A ≥ 0.
//! ```
//!
//! The dual `maximize 1·y s.t. Aᵀy ≤ c, y ≥ 0` has the origin as a feasible
//! basis, so the tableau is run on the dual with Bland's rule and the primal
//! solution is read off the slack columns of the final objective row.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("row {0} has no positive coefficient; the program is infeasible")]
    Infeasible(usize),
    #[error("objective coefficient {0} is negative or not finite")]
    BadObjective(usize),
    #[error("constraint coefficient ({row}, {col}) is negative or not finite")]
    BadCoefficient { row: usize, col: usize },
    #[error("pivot limit reached")]
    PivotLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringSolution {
    pub z: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

pub fn solve_covering(cost: &[f64], rows: &[Vec<f64>]) -> Result<CoveringSolution, SimplexError> {
    let n = cost.len();
    let m = rows.len();
    if let Some(j) = cost.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(SimplexError::BadObjective(j));
    }
    for (r, row) in rows.iter().enumerate() {
        if let Some(col) = row.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(SimplexError::BadCoefficient { row: r, col });
        }
        if row.iter().all(|&a| a <= 0.0) {
            return Err(SimplexError::Infeasible(r));
        }
    }
    if m == 0 {
        return Ok(CoveringSolution { z: vec![0.0; n], value: 0.0, pivots: 0 });
    }

    // Dual tableau: one row per primal variable, columns y_0..y_{m-1} then
    // slacks s_0..s_{n-1}, then the right-hand side.
    let width = m + n + 1;
    let mut t = vec![vec![0.0; width]; n];
    for v in 0..n {
        for k in 0..m {
            t[v][k] = rows[k][v];
        }
        t[v][m + v] = 1.0;
        t[v][width - 1] = cost[v];
    }
    let mut obj = vec![0.0; width];
    obj[..m].iter_mut().for_each(|r| *r = -1.0);
    let mut basis: Vec<usize> = (m..m + n).collect();

    let mut pivots = 0;
    loop {
        let Some(enter) = (0..m + n).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for r in 0..n {
            if t[r][enter] > PIVOT_EPS {
                let ratio = t[r][width - 1] / t[r][enter];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - PIVOT_EPS || (ratio <= best_ratio + PIVOT_EPS && basis[r] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio.min(best_ratio);
                    leave = Some(r);
                }
            }
        }
        // The dual is bounded because every primal row is coverable.
        let Some(r) = leave else {
            return Err(SimplexError::Infeasible(enter.min(m - 1)));
        };
        pivot(&mut t, &mut obj, r, enter);
        basis[r] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(SimplexError::PivotLimit);
        }
    }

    let z: Vec<f64> = (0..n).map(|v| obj[m + v].max(0.0)).collect();
    let value = cost.iter().zip(&z).map(|(c, z)| c * z).sum();
    Ok(CoveringSolution { z, value, pivots })
}

fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], r: usize, col: usize) {
    let p = t[r][col];
    t[r].iter_mut().for_each(|x| *x /= p);
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[col];
        if f != 0.0 {
            row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
        }
    }
    let f = obj[col];
    if f != 0.0 {
        obj.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
    }
}
