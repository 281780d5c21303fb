//! Shared inputs for the benchmarks.

use bmatch_core::mpc::{MachineCluster, MpcConfig};
use bmatch_core::{gen, BudgetVector, Graph};

/// Sparse unweighted `G(n, p)` with average degree `d` and budgets in `1..=3`.
pub fn sparse(n: usize, d: f64, seed: u64) -> (Graph, BudgetVector) {
    let g = gen::gnp_avg_degree(n, d, None, seed).expect("valid probability");
    let b = gen::uniform_budgets(n, 3, seed).expect("bmax is positive");
    (g, b)
}

/// The weighted instances of the accuracy sweep: at most 24 edges, weights in `1..=16`.
pub fn small_weighted(seed: u64) -> (Graph, BudgetVector) {
    gen::small_instance(4 + (seed % 9) as usize, 0.4, Some(16), 2, 24, seed).expect("a draw exists")
}

pub fn cluster(g: &Graph, seed: u64) -> MachineCluster {
    MachineCluster::for_graph(MpcConfig::with_seed(seed), g)
}
