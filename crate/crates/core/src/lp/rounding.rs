//! From tight fractional solutions to integral b-matchings.

use serde::Serialize;

use super::{ceil_log2, full_mpc, LpInstance, LpParams};
use crate::error::{Error, Result};
use crate::fixed::Fixed;
use crate::graph::{BMatching, BudgetVector, Graph};
use crate::mpc::MachineCluster;
use crate::rng;

const TAG_ROUND: u64 = 0x726f_756e;
const TAG_REPEAT: u64 = 0x7265_7065;

/// Samples edge `e` with probability `x_e / 4` and keeps it iff both
/// endpoints have at most `b` sampled edges. Requires `x_e <= 1`.
pub fn round_to_integral(g: &Graph, b: &BudgetVector, x: &[Fixed], seed: u64) -> BMatching {
    assert_eq!(x.len(), g.m());
    let key = rng::derive(seed, &[TAG_ROUND]);
    let sampled: Vec<bool> = x
        .iter()
        .enumerate()
        .map(|(e, &xe)| {
            assert!(xe <= Fixed::ONE, "rounding needs unit caps");
            // A uniform draw on [0, 2^66) against x_e * 2^64.
            let hi = rng::mix2(key, e as u64, 0) as u128;
            let lo = (rng::mix2(key, e as u64, 1) & 3) as u128;
            ((hi << 2) | lo) < xe.raw()
        })
        .collect();
    let mut count = vec![0u32; g.n()];
    for e in (0..g.m()).filter(|&e| sampled[e]) {
        let (u, v) = g.endpoints(e);
        count[u] += 1;
        count[v] += 1;
    }
    let keep = (0..g.m()).filter(|&e| {
        let (u, v) = g.endpoints(e);
        sampled[e] && count[u] <= b.get(u) && count[v] <= b.get(v)
    });
    BMatching::from_edges(g, b, keep).expect("survivors respect budgets")
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantApprox {
    #[serde(skip)]
    pub matching: BMatching,
    pub best_repetition: usize,
    pub sizes: Vec<usize>,
    pub lp_values: Vec<Fixed>,
    pub iterations: Vec<usize>,
    pub failed_repetitions: usize,
}

/// Best of `R` independent runs of tight solution + rounding.
pub fn constant_approx_bmatching(
    g: &Graph,
    b: &BudgetVector,
    cluster: &mut MachineCluster,
    params: &LpParams,
) -> Result<ConstantApprox> {
    b.check_for(g)?;
    let reps = params.repetitions.unwrap_or_else(|| ceil_log2(g.n()).max(1)).max(1);
    let inst = LpInstance::unit(g, b);
    let mut best: Option<(usize, BMatching)> = None;
    let mut out = ConstantApprox {
        matching: BMatching::empty(g.n()),
        best_repetition: 0,
        sizes: Vec::with_capacity(reps),
        lp_values: Vec::with_capacity(reps),
        iterations: Vec::with_capacity(reps),
        failed_repetitions: 0,
    };
    let mut last_err: Option<Error> = None;
    for rep in 0..reps {
        let mut child = cluster.child(&[TAG_REPEAT, rep as u64], g.n(), g.words());
        let res = full_mpc(&inst, &mut child, params);
        let child_seed = child.seed();
        cluster.absorb(child.take_log());
        match res {
            Ok(full) => {
                let m = round_to_integral(g, b, &full.x, child_seed);
                out.sizes.push(m.len());
                out.lp_values.push(full.x.iter().sum());
                out.iterations.push(full.iterations);
                if best.as_ref().is_none_or(|(_, bm)| m.len() > bm.len()) {
                    best = Some((rep, m));
                }
            }
            Err(e @ Error::NonConvergence { .. }) => {
                out.failed_repetitions += 1;
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((rep, m)) => {
            out.best_repetition = rep;
            out.matching = m;
            Ok(out)
        }
        None => Err(last_err.expect("at least one repetition ran")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{self, fixture, Fixture};
    use crate::mpc::MpcConfig;

    #[test]
    fn zero_solution_rounds_to_empty() {
        let g = fixture(Fixture::F2);
        let b = BudgetVector::constant(3, 1);
        for seed in 0..100 {
            assert!(round_to_integral(&g, &b, &[Fixed::ZERO; 3], seed).is_empty());
        }
    }

    #[test]
    fn empty_graph_gives_empty_matching() {
        let g = Graph::empty(4);
        let b = BudgetVector::constant(4, 1);
        let mut c = MachineCluster::for_graph(MpcConfig::default(), &g);
        assert!(constant_approx_bmatching(&g, &b, &mut c, &LpParams::default()).unwrap().matching.is_empty());
    }

    #[test]
    fn outputs_are_valid_and_reproducible() {
        let g = gen::gnp(60, 0.1, None, 3).unwrap();
        let b = gen::uniform_budgets(60, 3, 3).unwrap();
        let run = || {
            let mut c = MachineCluster::for_graph(MpcConfig::with_seed(11), &g);
            constant_approx_bmatching(&g, &b, &mut c, &LpParams::default()).unwrap()
        };
        let a = run();
        assert!(a.matching.is_valid_for(&g, &b));
        assert_eq!(a.sizes.len(), 6);
        assert_eq!(a.matching, run().matching);
        assert_eq!(a.matching.len(), *a.sizes.iter().max().unwrap());
    }

    #[test]
    fn single_edge_success_rate() {
        // One repetition keeps the edge with probability 0.8 / 4 = 0.2, so
        // ten repetitions succeed with probability 1 - 0.8^10 > 0.89.
        let g = fixture(Fixture::F1);
        let b = BudgetVector::constant(2, 1);
        let params = LpParams { repetitions: Some(10), ..Default::default() };
        let hits = (0..400)
            .filter(|&s| {
                let mut c = MachineCluster::for_graph(MpcConfig::with_seed(s), &g);
                !constant_approx_bmatching(&g, &b, &mut c, &params).unwrap().matching.is_empty()
            })
            .count();
        let p = 1.0 - 0.8f64.powi(10);
        let sd = (400.0 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - 400.0 * p).abs() <= 4.0 * sd, "hits = {hits}");
    }
}
