//! The idealized doubling process.

use serde::Serialize;

use super::{FractionalSolution, LpInstance, ThresholdSchedule};
use crate::fixed::Fixed;
use crate::graph::Graph;

/// Per-round trace: `x[t]` for `t = 0..`, `v_active[t]` for `t = 0..` and
/// `e_active[t - 1]` for `t = 1..` (edge ids).
#[derive(Clone, Debug, Default, Serialize)]
pub struct History {
    pub x: Vec<Vec<Fixed>>,
    pub v_active: Vec<Vec<usize>>,
    pub e_active: Vec<Vec<usize>>,
}

/// Runs `T` rounds on the whole graph of `inst`.
pub fn sequential(inst: &LpInstance, rounds: usize, thresholds: &ThresholdSchedule, trace: bool) -> FractionalSolution {
    let g = inst.graph;
    let view: Vec<u32> = (0..g.m() as u32).collect();
    let caps: Vec<Fixed> = (0..g.m()).map(|e| inst.cap(e)).collect();
    let run = run_view(g, &view, &inst.b, &caps, rounds, thresholds, trace);
    FractionalSolution { x: run.x, history: run.history }
}

/// `q_v = 0.8 b_v / max(deg_v, 2 m / n)`, rounded down.
pub(crate) fn initial_shares(g: &Graph, view: &[u32], b: &[Fixed]) -> Vec<Fixed> {
    let n = g.n();
    let mut deg = vec![0u64; n];
    for &e in view {
        let (u, v) = g.endpoints(e as usize);
        deg[u] += 1;
        deg[v] += 1;
    }
    let two_m = 2 * view.len() as u128;
    (0..n)
        .map(|v| {
            let scale = (deg[v] as u128 * n as u128).max(two_m);
            if scale == 0 {
                Fixed::ZERO
            } else {
                b[v].mul_ratio_floor(4 * n as u128, 5 * scale)
            }
        })
        .collect()
}

/// `x_{e,0} = min(r_e, q_u, q_v)` for every view position.
pub(crate) fn initial_values(g: &Graph, view: &[u32], b: &[Fixed], caps: &[Fixed]) -> Vec<Fixed> {
    let q = initial_shares(g, view, b);
    view.iter()
        .zip(caps)
        .map(|(&e, &r)| {
            let (u, v) = g.endpoints(e as usize);
            r.min(q[u]).min(q[v])
        })
        .collect()
}

pub(crate) struct ViewRun {
    /// Values by view position.
    pub x: Vec<Fixed>,
    pub history: Option<History>,
}

/// The process on the subgraph `(V, view)` with budgets `b` and caps by view
/// position. Stops early once no edge can double again, since nothing can
/// change after that.
pub(crate) fn run_view(
    g: &Graph,
    view: &[u32],
    b: &[Fixed],
    caps: &[Fixed],
    rounds: usize,
    sched: &ThresholdSchedule,
    trace: bool,
) -> ViewRun {
    let n = g.n();
    let mut x = initial_values(g, view, b, caps);
    let mut y = vec![Fixed::ZERO; n];
    for (i, &e) in view.iter().enumerate() {
        let (u, v) = g.endpoints(e as usize);
        y[u] += x[i];
        y[v] += x[i];
    }
    let mut cand: Vec<u32> = (0..view.len() as u32).filter(|&i| x[i as usize].double() <= caps[i as usize]).collect();
    let mut alive = vec![true; n];
    let mut history = trace.then(|| History {
        x: vec![x.clone()],
        v_active: vec![(0..n).collect()],
        e_active: Vec::new(),
    });
    let mut seen = vec![0usize; n];
    for t in 1..=rounds {
        if cand.is_empty() && history.is_none() {
            break;
        }
        if let Some(h) = history.as_mut() {
            for v in 0..n {
                if alive[v] && y[v] > sched.value(b[v], v, t) {
                    alive[v] = false;
                }
            }
            h.v_active.push((0..n).filter(|&v| alive[v]).collect());
        } else {
            for &i in &cand {
                let (u, v) = g.endpoints(view[i as usize] as usize);
                for w in [u, v] {
                    if seen[w] != t {
                        seen[w] = t;
                        if alive[w] && y[w] > sched.value(b[w], w, t) {
                            alive[w] = false;
                        }
                    }
                }
            }
        }
        let mut next = Vec::with_capacity(cand.len());
        let mut doubled = Vec::new();
        for &i in &cand {
            let iu = i as usize;
            let (u, v) = g.endpoints(view[iu] as usize);
            if alive[u] && alive[v] {
                let old = x[iu];
                x[iu] = old.double();
                y[u] += old;
                y[v] += old;
                if history.is_some() {
                    doubled.push(view[iu] as usize);
                }
                if x[iu].double() <= caps[iu] {
                    next.push(i);
                }
            }
        }
        cand = next;
        if let Some(h) = history.as_mut() {
            h.e_active.push(doubled);
            h.x.push(x.clone());
        }
    }
    ViewRun { x, history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{self, fixture, Fixture};
    use crate::graph::BudgetVector;
    use crate::lp::{is_feasible, loose_sets, vertex_sums, Alpha};
    use proptest::prelude::*;

    #[test]
    fn single_edge_never_doubles() {
        let g = fixture(Fixture::F1);
        let b = BudgetVector::constant(2, 1);
        let inst = LpInstance::unit(&g, &b);
        for t in [0, 1, 5, 40] {
            let x = sequential(&inst, t, &ThresholdSchedule::seeded(t as u64), false).x;
            assert_eq!(x, vec![Fixed::from_ratio_floor(4, 5)]);
        }
    }

    #[test]
    fn triangle_stays_at_four_tenths() {
        let g = fixture(Fixture::F2);
        let b = BudgetVector::constant(3, 1);
        let inst = LpInstance::unit(&g, &b);
        for t in [1, 3, 10] {
            let sol = sequential(&inst, t, &ThresholdSchedule::seeded(9), true);
            assert_eq!(sol.x, vec![Fixed::from_ratio_floor(2, 5); 3]);
            let h = sol.history.unwrap();
            assert!(h.v_active[1].is_empty());
            assert_eq!(h.x.len(), t + 1);
        }
    }

    #[test]
    fn enough_rounds_make_random_graphs_fifth_tight() {
        for seed in 0..5 {
            let g = gen::gnp(300, 0.05, None, seed).unwrap();
            let b = gen::uniform_budgets(300, 3, seed).unwrap();
            let inst = LpInstance::unit(&g, &b);
            let t = (5.0 * g.m() as f64 + 1.0).log2().ceil() as usize;
            let x = sequential(&inst, t, &ThresholdSchedule::seeded(seed), false).x;
            assert!(loose_sets(&inst, &x, Alpha::ONE_FIFTH).e_loose.is_empty());
        }
    }

    #[test]
    fn trace_and_fast_path_agree() {
        let g = gen::gnp(120, 0.1, None, 4).unwrap();
        let b = gen::uniform_budgets(120, 4, 4).unwrap();
        let inst = LpInstance::unit(&g, &b);
        let s = ThresholdSchedule::seeded(4);
        assert_eq!(sequential(&inst, 12, &s, true).x, sequential(&inst, 12, &s, false).x);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn every_round_is_feasible_and_bounded(seed in any::<u64>(), n in 2usize..40, p in 0.05f64..0.9, rounds in 0usize..14) {
            let g = gen::gnp(n, p, None, seed).unwrap();
            let b = gen::uniform_budgets(n, 3, seed ^ 1).unwrap();
            let inst = LpInstance::unit(&g, &b);
            let sol = sequential(&inst, rounds, &ThresholdSchedule::seeded(seed), true);
            let h = sol.history.unwrap();
            for (t, xt) in h.x.iter().enumerate() {
                prop_assert!(is_feasible(&inst, xt));
                for (v, y) in vertex_sums(&g, xt).iter().enumerate() {
                    // sum <= 0.8 b_v
                    prop_assert!(y.mul_int(5) <= inst.b[v].mul_int(4));
                }
                for e in 0..g.m() {
                    prop_assert!(xt[e] <= h.x[0][e].shl(t as u32));
                }
            }
            let loose = loose_sets(&inst, &sol.x, Alpha::ONE_FIFTH).e_loose.len() as u128;
            // |E_loose| <= 5m / 2^T
            prop_assert!(loose << rounds <= 5 * g.m() as u128);
        }
    }
}
