//! Small reference instances used by the tests, the acceptance suite and the
//! shipped model files.

use crate::markov::{ArmId, ArmSpec, Atom, Drift, Kernel, StateSpace};
use crate::model::Model;

/// Minorization data with `G` = every state, `φ` proportional to the
/// column minima over all kernels and `α` their sum.
pub fn doeblin_atom(kernels: &[Kernel]) -> Atom {
    let n = kernels[0].size();
    let mins: Vec<f64> = (0..n)
        .map(|y| kernels.iter().flat_map(|k| (0..n).map(move |x| k.get(x, y))).fold(f64::INFINITY, f64::min))
        .collect();
    let alpha: f64 = mins.iter().sum();
    let phi = mins.iter().map(|m| m / alpha).collect();
    Atom::new((0..n).collect(), alpha.min(1.0), phi, n).expect("kernels share a positive column")
}

/// `V ≡ 1` with `b̄ = b = 1/2`, valid whenever `G` is the whole space.
pub fn flat_drift(size: usize) -> Drift {
    Drift::new(vec![1.0; size], 0.5, 0.5, size).expect("flat drift is valid")
}

fn arm(id: ArmId, kernels: Vec<Kernel>, initial: Vec<Vec<f64>>) -> ArmSpec {
    let size = kernels[0].size();
    let atom = doeblin_atom(&kernels);
    ArmSpec::new(id, kernels, initial, Some(atom), Some(flat_drift(size))).expect("reference arm is valid")
}

fn iid_arm(id: ArmId, rows: Vec<Vec<f64>>) -> ArmSpec {
    let kernels = rows.iter().map(|r| Kernel::iid(r.clone()).expect("valid row")).collect();
    arm(id, kernels, rows)
}

fn bernoulli(p: f64) -> Vec<f64> {
    vec![1.0 - p, p]
}

/// Success probabilities of the two Bernoulli arms of [`bernoulli_pair`].
pub const PAIR_FIRST: [f64; 3] = [0.5, 0.6, 0.7];
pub const PAIR_SECOND: [f64; 2] = [0.4, 0.9];
/// Point `(0.6, 0.4)`: arm 1 is better by 0.2.
pub const PAIR_TRUE: usize = 2;

/// One group of two i.i.d. Bernoulli arms with per-arm parameters, the grid
/// being the product `PAIR_FIRST × PAIR_SECOND` (point `2a + b`).
pub fn bernoulli_pair() -> Model {
    bernoulli_product(&PAIR_FIRST, &PAIR_SECOND)
}

/// One group of two i.i.d. Bernoulli arms on the product grid
/// `first × second`, point id `a · second.len() + b`.
pub fn bernoulli_product(first: &[f64], second: &[f64]) -> Model {
    let points: Vec<Vec<f64>> = first.iter().flat_map(|&a| second.iter().map(move |&b| vec![a, b])).collect();
    let arm1 = iid_arm(ArmId::new(0, 0), points.iter().map(|p| bernoulli(p[0])).collect());
    let arm2 = iid_arm(ArmId::new(0, 1), points.iter().map(|p| bernoulli(p[1])).collect());
    let space = StateSpace::new(vec![0.0, 1.0]).expect("finite rewards");
    Model::new(space, points, vec![vec![arm1, arm2]], Some(1.0)).expect("reference model is valid")
}

/// Two-state chain under point 0 and its alternative under point 1.
pub const WALK_KERNELS: [[[f64; 2]; 2]; 2] = [[[0.9, 0.1], [0.2, 0.8]], [[0.7, 0.3], [0.4, 0.6]]];

/// A single Markov arm with two parameter points, started in state 0.
pub fn markov_walk() -> Model {
    let kernels = WALK_KERNELS
        .iter()
        .map(|k| Kernel::new(k.iter().map(|r| r.to_vec()).collect()).expect("valid kernel"))
        .collect();
    let a = arm(ArmId::new(0, 0), kernels, vec![vec![1.0, 0.0]; 2]);
    let space = StateSpace::new(vec![0.0, 1.0]).expect("finite rewards");
    Model::new(space, vec![vec![0.0], vec![1.0]], vec![vec![a]], None).expect("reference model is valid")
}

fn two_state(a: f64, b: f64) -> Kernel {
    Kernel::new(vec![vec![1.0 - a, a], vec![b, 1.0 - b]]).expect("valid kernel")
}

/// Two groups of one Markov arm each; the group-1 chain alone identifies the
/// point. Group 1 is optimal at points 0 and 2, group 2 at points 1 and 3.
pub fn one_arm_per_group() -> Model {
    let first = [0.6, 0.2, 0.3, 0.5];
    let second = [0.2, 0.6, 0.1, 0.9];
    let make = |id, up: &[f64]| {
        let kernels: Vec<Kernel> = up.iter().map(|&a| two_state(a, 0.4)).collect();
        let initial = vec![vec![0.5, 0.5]; up.len()];
        arm(id, kernels, initial)
    };
    let space = StateSpace::new(vec![0.0, 1.0]).expect("finite rewards");
    let points = (0..4).map(|s| vec![s as f64]).collect();
    let groups = vec![vec![make(ArmId::new(0, 0), &first)], vec![make(ArmId::new(1, 0), &second)]];
    Model::new(space, points, groups, Some(1.0)).expect("reference model is valid")
}

/// Point ids of [`super_efficiency`].
pub const SUPER_A: usize = 0;
pub const SUPER_B: usize = 1;
pub const SUPER_D: usize = 2;
pub const SUPER_E: usize = 3;

/// Two groups over four states with rewards `(0, 1, 0, 1)`. Group 1 has one
/// categorical arm, group 2 two reward-coin arms. Points, on a line:
///
/// * `A` (0.0): group 1 optimal.
/// * `B` (1.0): arm 2.1 optimal, empty bad set.
/// * `D` (1.29): arm 2.1 optimal; `E` is in its bad set.
/// * `E` (2.5): arm 2.2 optimal.
///
/// `D` lies within `δ_N/2` of `B` for `N = 10³` but not for `N ≥ 10⁴`, so
/// the estimated bad set around `B` is nonempty only at the smallest horizon.
pub fn super_efficiency() -> Model {
    let categorical =
        [[0.05, 0.45, 0.05, 0.45], [0.45, 0.05, 0.05, 0.45], [0.06, 0.04, 0.86, 0.04], [0.40, 0.05, 0.05, 0.50]];
    let coin = |q: f64| vec![(1.0 - q) / 2.0, q / 2.0, (1.0 - q) / 2.0, q / 2.0];
    let q21 = [0.5, 0.9, 0.5, 0.5];
    let q22 = [0.4, 0.4, 0.4, 0.75];
    let groups = vec![
        vec![iid_arm(ArmId::new(0, 0), categorical.iter().map(|r| r.to_vec()).collect())],
        vec![
            iid_arm(ArmId::new(1, 0), q21.iter().map(|&q| coin(q)).collect()),
            iid_arm(ArmId::new(1, 1), q22.iter().map(|&q| coin(q)).collect()),
        ],
    ];
    let space = StateSpace::new(vec![0.0, 1.0, 0.0, 1.0]).expect("finite rewards");
    let points = vec![vec![0.0], vec![1.0], vec![1.29], vec![2.5]];
    Model::new(space, points, groups, Some(1.0)).expect("reference model is valid")
}
